#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// Process-level checks of the CLI contract: subcommands, exit codes, and
// byte-identical outputs.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

const std::string kCli = ROADOBJ_CLI_PATH;

struct TempDir {
    std::string path;
    TempDir() {
        char tmpl[] = "/tmp/roadobj_cli_XXXXXX";
        path = mkdtemp(tmpl);
    }
    ~TempDir() { [[maybe_unused]] const int rc = std::system(("rm -rf " + path).c_str()); }
    std::string file(const std::string& name) const { return path + "/" + name; }
};

int run(const std::string& args) {
    const int status = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("synth: writes outputs, byte-identical for one seed, exit 2 on bad config") {
    TempDir dir;
    write_file(dir.file("cfg.toml"), "[synth]\nn_signs = 3\nn_frames = 15\nseed = 5\n");
    CHECK(run("synth --config " + dir.file("cfg.toml") + " --scene-out " + dir.file("a.json") +
              " --gt-out " + dir.file("ga.json")) == 0);
    CHECK(run("synth --config " + dir.file("cfg.toml") + " --scene-out " + dir.file("b.json") +
              " --gt-out " + dir.file("gb.json")) == 0);
    CHECK(slurp(dir.file("a.json")) == slurp(dir.file("b.json")));
    CHECK(slurp(dir.file("ga.json")) == slurp(dir.file("gb.json")));
    CHECK(!slurp(dir.file("a.json")).empty());

    // --seed flag overrides the config seed.
    CHECK(run("synth --config " + dir.file("cfg.toml") + " --seed 6 --scene-out " +
              dir.file("c.json") + " --gt-out " + dir.file("gc.json")) == 0);
    CHECK(slurp(dir.file("a.json")) != slurp(dir.file("c.json")));

    write_file(dir.file("bad.toml"), "[synth]\noutlier_fraction = 1.5\n");
    CHECK(run("synth --config " + dir.file("bad.toml") + " --scene-out " + dir.file("x.json") +
              " --gt-out " + dir.file("gx.json")) == 2);
}

TEST_CASE("annotate/eval: determinism, report schema, exit codes") {
    TempDir dir;
    write_file(dir.file("cfg.toml"), "[synth]\nn_signs = 4\nn_circles = 1\nn_frames = 20\nseed = 9\n");
    REQUIRE(run("synth --config " + dir.file("cfg.toml") + " --scene-out " + dir.file("scene.json") +
                " --gt-out " + dir.file("gt.json")) == 0);

    CHECK(run("annotate --scene " + dir.file("scene.json") + " --out " + dir.file("ann1.json")) == 0);
    CHECK(run("annotate --scene " + dir.file("scene.json") + " --out " + dir.file("ann2.json")) == 0);
    CHECK(slurp(dir.file("ann1.json")) == slurp(dir.file("ann2.json")));

    CHECK(run("annotate --scene " + dir.file("scene.json") + " --threads 3 --out " +
              dir.file("ann3.json")) == 0);
    CHECK(slurp(dir.file("ann1.json")) == slurp(dir.file("ann3.json")));

    CHECK(run("eval --pred " + dir.file("ann1.json") + " --ref " + dir.file("gt.json") +
              " --scene " + dir.file("scene.json") + " --report " + dir.file("report.json")) == 0);
    const std::string report = slurp(dir.file("report.json"));
    for (const char* key : {"\"eval_2d\"", "\"eval_3d\"", "\"precision\"", "\"recall\"",
                            "\"mean_error\"", "\"n_matched\"", "\"n_pred\"", "\"n_ref\"",
                            "\"per_frame\""})
        CHECK(report.find(key) != std::string::npos);

    // Identical pred/ref: both metric blocks report precision/recall 1.
    CHECK(run("eval --pred " + dir.file("gt.json") + " --ref " + dir.file("gt.json") +
              " --scene " + dir.file("scene.json") + " --report " + dir.file("self.json")) == 0);
    CHECK(slurp(dir.file("self.json")).find("\"precision\": 1.0") != std::string::npos);

    CHECK(run("annotate --scene " + dir.file("missing.json") + " --out " + dir.file("y.json")) == 2);
    CHECK(run("eval --pred " + dir.file("ann1.json") + " --ref " + dir.file("gt.json") +
              " --scene " + dir.file("cfg.toml")) == 2);  // not a scene document
}

TEST_CASE("annotate: scene without static-object observations exits 3") {
    TempDir dir;
    // Valid scene with frames and points but zero observations.
    write_file(dir.file("empty.json"), R"({
  "format_version": "1",
  "frames": [
    {"frame_id": 0, "timestamp": 0, "camera_name": "front",
     "intrinsics": {"fx": 1000.0, "fy": 1000.0, "cx": 800.0, "cy": 450.0, "width": 1600, "height": 900},
     "world_from_camera": {"rotation": [0.5, -0.5, 0.5, -0.5], "translation": [0.0, 0.0, 1.6]}}
  ],
  "map_points": [],
  "observations": []
})");
    CHECK(run("annotate --scene " + dir.file("empty.json") + " --out " + dir.file("out.json")) == 3);
}

TEST_CASE("overlay: svg output with frame dimensions, exit 2 for unknown frame") {
    TempDir dir;
    write_file(dir.file("cfg.toml"), "[synth]\nn_signs = 2\nn_frames = 12\nseed = 3\n");
    REQUIRE(run("synth --config " + dir.file("cfg.toml") + " --scene-out " + dir.file("scene.json") +
                " --gt-out " + dir.file("gt.json")) == 0);
    REQUIRE(run("annotate --scene " + dir.file("scene.json") + " --out " + dir.file("ann.json")) == 0);

    CHECK(run("overlay --scene " + dir.file("scene.json") + " --annotations " + dir.file("ann.json") +
              " --gt " + dir.file("gt.json") + " --frame 5 --out " + dir.file("f5.svg")) == 0);
    const std::string svg = slurp(dir.file("f5.svg"));
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("width=\"1600\"") != std::string::npos);
    CHECK(svg.find("height=\"900\"") != std::string::npos);

    CHECK(run("overlay --scene " + dir.file("scene.json") + " --annotations " + dir.file("ann.json") +
              " --frame 9999 --out " + dir.file("bad.svg")) == 2);
}
