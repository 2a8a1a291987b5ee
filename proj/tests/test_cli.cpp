#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "ftdc/cohort.hpp"
#include "ftdc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ftdc;

namespace {

const fs::path kWork = fs::path(FTDC_TEST_WORKDIR) / "cli";

int run(const std::string& args) {
    const std::string cmd = std::string(FTDC_CLI) + " " + args + " > " + (kWork / "last.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t lines(const fs::path& p) {
    const std::string s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

fs::path fresh(const std::string& name) {
    const fs::path p = kWork / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Subjects table without features plus one surface pair per subject.
void write_surface_fixture(const fs::path& dir, double gap_mm, int subjects) {
    const TriMesh inner = make_icosphere(2, 30.0);
    std::vector<Vec3> outer;
    for (const auto& p : inner.vertices()) outer.push_back(p.normalized() * (30.0 + gap_mm));
    std::ofstream csv(dir / "subjects.csv");
    csv << "id,label,age,sex,mmse,education\n";
    for (int i = 0; i < subjects; ++i) {
        const std::string id = "p" + std::to_string(i);
        csv << id << "," << to_string(kAllDiagnoses[static_cast<std::size_t>(i % 5)]) << ",70,F,25,12\n";
        write_mesh(inner, inner_mesh_path(dir, id));
        write_mesh(inner.with_vertices(outer), outer_mesh_path(dir, id));
    }
    write_atlas(make_sphere_atlas(inner, 6), dir / "atlas.csv");
}

}  // namespace

TEST_CASE("synth writes 204 rows and is reproducible") {
    const fs::path d = fresh("synth");
    REQUIRE(run("synth --preset niftd --seed 5 --out " + (d / "a.csv").string()) == 0);
    REQUIRE(run("synth --preset niftd --seed 5 --out " + (d / "b.csv").string()) == 0);
    CHECK(lines(d / "a.csv") == 205);
    CHECK(slurp(d / "a.csv") == slurp(d / "b.csv"));
    REQUIRE(run("synth --preset niftd --seed 6 --out " + (d / "c.csv").string()) == 0);
    CHECK(slurp(d / "a.csv") != slurp(d / "c.csv"));
    CHECK(load_cohort(d / "a.csv").class_counts() == std::array<int, kNumDiagnoses>{84, 24, 30, 25, 41});
}

TEST_CASE("synth rejects bad specs") {
    const fs::path d = fresh("synth_bad");
    auto spec = fixture::separable_spec({3, 3, 3, 3, 3}, 1, 0.1).to_json();
    for (auto& [k, v] : spec["counts"].items()) v = 0;
    std::ofstream(d / "zero.json") << spec.dump();
    CHECK(run("synth --spec " + (d / "zero.json").string() + " --out " + (d / "z.csv").string()) != 0);
    CHECK_FALSE(fs::exists(d / "z.csv"));
    std::ofstream(d / "broken.json") << "{ not json";
    CHECK(run("synth --spec " + (d / "broken.json").string() + " --out " + (d / "z.csv").string()) != 0);
}

TEST_CASE("usage errors exit with code 1") {
    const fs::path d = fresh("usage");
    CHECK(run("evaluate --cohort nowhere.csv --out " + d.string()) == 1);
    CHECK(run("bogus") == 1);
    CHECK(run("synth --preset niftd --seed 1 --out " + (d / "c.csv").string()) == 0);
    CHECK(run("evaluate --cohort " + (d / "c.csv").string() + " --seed 1 --k 2 --out " + d.string()) == 1);
    CHECK(run("evaluate --cohort " + (d / "c.csv").string() + " --seed 1 --method tree --out " + d.string()) == 1);
}

TEST_CASE("data errors exit with code 2") {
    const fs::path d = fresh("data");
    std::ofstream(d / "bad.csv") << "id,label,age,sex,mmse,education,f1\na,ftd,70,M,20,12,1\n";
    CHECK(run("evaluate --cohort " + (d / "bad.csv").string() + " --seed 1 --out " + d.string()) == 2);
    CHECK(slurp(d / "../last.log").find("unknown label") != std::string::npos);
}

TEST_CASE("evaluate on a separable cohort reports accuracy 1") {
    const fs::path d = fresh("separable");
    save_cohort(generate_synthetic(fixture::separable_spec({30, 20, 20, 20, 20}, 3, 0.0)), d / "c.csv");
    REQUIRE(run("evaluate --cohort " + (d / "c.csv").string() +
                " --method svm --hierarchy default --seed 1 --reps 3 --out " + (d / "out").string()) == 0);
    const auto report = nlohmann::json::parse(slurp(d / "out" / "cascade_report.json"));
    CHECK(report["accuracy"]["mean"].get<double>() == 1.0);
    for (const char* f : {"cascade_table.csv", "cascade_confusion.csv", "cascade_roc.csv", "cascade_roc.svg",
                          "cascade_misclassified.csv", "table.csv"})
        CHECK(fs::exists(d / "out" / f));
}

TEST_CASE("hier-vs-flat comparison, config precedence and saved models") {
    const fs::path d = fresh("compare");
    REQUIRE(run("synth --preset niftd --seed 2 --out " + (d / "c.csv").string()) == 0);
    std::ofstream(d / "cfg.json") << R"({"reps": 2, "method": "lda", "seed": 9})";
    REQUIRE(run("compare --what hier-vs-flat --config " + (d / "cfg.json").string() + " --cohort " +
                (d / "c.csv").string() + " --method svm --out " + (d / "out").string()) == 0);
    const std::string table = slurp(d / "out" / "compare_hier_vs_flat.csv");
    CHECK(table.find("hierarchical,svm,Overall") != std::string::npos);
    CHECK(table.find("flat,svm,Overall") != std::string::npos);
    const auto report = nlohmann::json::parse(slurp(d / "out" / "cascade_report.json"));
    CHECK(report["reps"] == 2);
    CHECK(report["seed"] == 9);

    REQUIRE(run("evaluate --cohort " + (d / "c.csv").string() + " --seed 3 --reps 1 --save-model " +
                (d / "model.json").string() + " --out " + (d / "out2").string()) == 0);
    REQUIRE(run("regions --cohort " + (d / "c.csv").string() + " --model " + (d / "model.json").string() +
                " --top 5 --out " + (d / "reg1").string()) == 0);
    REQUIRE(run("regions --cohort " + (d / "c.csv").string() + " --model " + (d / "model.json").string() +
                " --top 5 --out " + (d / "reg2").string()) == 0);
    CHECK(lines(d / "reg1" / "regions.csv") == 1 + 4 * 68);
    CHECK(slurp(d / "reg1" / "regions.csv") == slurp(d / "reg2" / "regions.csv"));
    CHECK(fs::exists(d / "reg1" / "regions_1.svg"));
}

TEST_CASE("same seed gives byte-identical reports; jobs does not matter") {
    const fs::path d = fresh("determinism");
    REQUIRE(run("synth --preset niftd --seed 4 --out " + (d / "c.csv").string()) == 0);
    const std::string base = "evaluate --cohort " + (d / "c.csv").string() + " --seed 17 --reps 4 --model both";
    REQUIRE(run(base + " --jobs 1 --out " + (d / "a").string()) == 0);
    REQUIRE(run(base + " --jobs 4 --out " + (d / "b").string()) == 0);
    for (const char* f : {"cascade_report.json", "flat_report.json", "table.csv", "cascade_misclassified.csv"})
        CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
}

TEST_CASE("extract on surface fixtures") {
    const fs::path d = fresh("extract");
    write_surface_fixture(d, 0.0, 5);
    REQUIRE(run("extract --subjects " + (d / "subjects.csv").string() + " --mesh-dir " + d.string() +
                " --features region_means --out " + (d / "zero.csv").string()) == 0);
    const Cohort zero = load_cohort(d / "zero.csv");
    CHECK(zero.feature_count() == 6);
    for (const auto& s : zero.subjects())
        for (double v : s.features) CHECK(std::abs(v) < 1e-9);

    const fs::path p = fresh("extract_planes");
    write_surface_fixture(p, 2.5, 5);
    const std::string common = "extract --subjects " + (p / "subjects.csv").string() + " --mesh-dir " + p.string() +
                               " --features region_means --thickness linked";
    REQUIRE(run(common + " --smoother none --out " + (p / "none.csv").string()) == 0);
    REQUIRE(run(common + " --smoother susan --out " + (p / "susan.csv").string()) == 0);
    CHECK(slurp(p / "none.csv") == slurp(p / "susan.csv"));
    const Cohort planes = load_cohort(p / "none.csv");
    for (const auto& s : planes.subjects())
        for (double v : s.features) CHECK(v == doctest::Approx(2.5).epsilon(1e-9));
    REQUIRE(run("extract --subjects " + (p / "subjects.csv").string() + " --mesh-dir " + p.string() +
                " --features concatenated --components 40 --out " + (p / "all.csv").string()) == 0);
    CHECK(load_cohort(p / "all.csv").feature_count() == 46);

    fs::remove(outer_mesh_path(p, "p3"));
    CHECK(run(common + " --out " + (p / "missing.csv").string()) == 2);
}

TEST_CASE("every subcommand documents its flags") {
    fresh("help");
    const std::pair<const char*, std::vector<const char*>> expected[] = {
        {"synth", {"--spec", "--preset", "--noise", "--seed", "--out"}},
        {"extract", {"--mesh-dir", "--atlas", "--smoother", "--fwhm", "--features", "--components", "--out"}},
        {"evaluate", {"--config", "--cohort", "--method", "--hierarchy", "--k", "--reps", "--seed", "--tune",
                      "--step-mode", "--jobs", "--compare", "--out"}},
        {"regions", {"--cohort", "--model", "--top", "--out"}},
    };
    for (const auto& [cmd, flags] : expected) {
        REQUIRE(run(std::string(cmd) + " --help") == 0);
        const std::string help = slurp(kWork / "last.log");
        for (const char* f : flags) {
            CAPTURE(cmd);
            CAPTURE(f);
            CHECK(help.find(f) != std::string::npos);
        }
    }
}
