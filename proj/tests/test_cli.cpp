#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using velsurf::cli::run;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result velsurf_cmd(std::vector<std::string> args) {
    args.insert(args.begin(), "velsurf");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() / ("velsurf_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    std::string operator()(const std::string& name) const { return (dir / name).string(); }
    std::vector<std::string> experiments() const {
        std::vector<std::string> out;
        for (const auto& e : fs::directory_iterator(dir / "data"))
            if (e.path().extension() == ".csv") out.push_back(e.path().string());
        std::sort(out.begin(), out.end());
        return out;
    }
};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("pipeline from synthetic data to surface and outliers") {
    Workspace ws;
    REQUIRE(velsurf_cmd({"synth", "--out-dir", ws("data"), "--n-steps", "500", "--scale", "2=2"}).code == 0);
    const auto files = ws.experiments();
    REQUIRE(files.size() == 5);
    CHECK(fs::exists(ws("data/synth.manifest.json")));
    std::vector<std::string> before;
    for (const auto& f : files) before.push_back(slurp(f));

    const auto val = velsurf_cmd(concat({"validate"}, files));
    CHECK(val.code == 0);
    CHECK(val.out == "severity,experiment_id,message\n");

    REQUIRE(velsurf_cmd(concat({"preprocess", "-o", ws("ds.txt")}, files)).code == 0);

    const auto gs = velsurf_cmd({"gridsearch", ws("ds.txt"), "-o", ws("table.csv"), "--gammas", "0.5", "--Cs", "1",
                                 "--epsilons", "0.01", "--k", "3"});
    REQUIRE(gs.code == 0);
    const std::string table = slurp(ws("table.csv"));
    CHECK(std::count(table.begin(), table.end(), '\n') == 2);
    const auto best = nlohmann::json::parse(slurp(ws("table.best.json")));
    CHECK(best["gamma"] == 0.5);

    REQUIRE(velsurf_cmd({"train", ws("ds.txt"), "--params", ws("table.best.json"), "-o", ws("model.txt")}).code == 0);
    const auto pred = velsurf_cmd({"predict", ws("model.txt"), "--time-ns", "100", "--thickness-in", "0.34375"});
    REQUIRE(pred.code == 0);
    CHECK(std::count(pred.out.begin(), pred.out.end(), '\n') == 1);
    CHECK(std::isfinite(std::stod(pred.out)));

    std::ofstream(ws("queries.csv")) << "time_ns,thickness_in\n100,0.34375\n200,0.3\n";
    const auto q = velsurf_cmd({"predict", ws("model.txt"), "--query-csv", ws("queries.csv")});
    REQUIRE(q.code == 0);
    CHECK(q.out.rfind("time_ns,thickness_in,velocity_mps\n100,0.34375," + pred.out.substr(0, pred.out.size() - 1), 0) == 0);

    REQUIRE(velsurf_cmd({"surface", ws("model.txt"), "-o", ws("surface.csv")}).code == 0);
    REQUIRE(velsurf_cmd({"surface", ws("model.txt"), "-o", ws("surface.xyz"), "--format", "xyz", "--time-stop", "10"}).code == 0);
    CHECK(slurp(ws("surface.xyz")).rfind("time_ns,thickness_in,velocity_mps\n0,0.25,", 0) == 0);

    REQUIRE(velsurf_cmd({"train", ws("ds.txt"), "--kernel", "arbf", "-o", ws("arbf.txt")}).code == 0);
    REQUIRE(velsurf_cmd(concat({"outliers", ws("arbf.txt"), "-o", ws("out.csv"), "--loo"}, files)).code == 0);
    std::istringstream report(slurp(ws("out.csv")));
    std::string header, first, line;
    std::getline(report, header);
    std::getline(report, first);
    CHECK(header == "id,score,flagged");
    CHECK(first.find("synth_w0.3750,") == 0);
    CHECK(first.find(",true") != std::string::npos);
    while (std::getline(report, line)) CHECK(line.find(",false") != std::string::npos);

    // manifests sit next to every primary output
    for (const char* f : {"ds.txt", "table.csv", "model.txt", "surface.csv", "out.csv"}) {
        const auto m = nlohmann::json::parse(slurp(ws(std::string(f) + ".manifest.json")));
        CHECK(m["tool"] == "velsurf");
        CHECK(!m["inputs"].empty());
        CHECK(m["outputs"][0]["digest"].get<std::string>().rfind("fnv1a64:", 0) == 0);
    }
    // inputs are left untouched
    for (std::size_t i = 0; i < files.size(); ++i) CHECK(slurp(files[i]) == before[i]);
    // no temporary files are left behind
    for (const auto& e : fs::recursive_directory_iterator(ws.dir)) CHECK(e.path().extension() != ".tmp");
}

TEST_CASE("reruns reproduce outputs byte for byte") {
    Workspace ws;
    REQUIRE(velsurf_cmd({"synth", "--out-dir", ws("data"), "--n-steps", "400"}).code == 0);
    const auto files = ws.experiments();
    REQUIRE(velsurf_cmd(concat({"preprocess", "-o", ws("a.txt")}, files)).code == 0);
    REQUIRE(velsurf_cmd(concat({"preprocess", "-o", ws("b.txt")}, files)).code == 0);
    CHECK(slurp(ws("a.txt")) == slurp(ws("b.txt")));
    const std::vector<std::string> grid{"--gammas", "0.3,0.5", "--Cs", "1", "--epsilons", "0.01,0.05", "--k", "2"};
    REQUIRE(velsurf_cmd(concat({"gridsearch", ws("a.txt"), "-o", ws("t1.csv")}, grid)).code == 0);
    REQUIRE(velsurf_cmd(concat({"--jobs", "2", "gridsearch", ws("a.txt"), "-o", ws("t2.csv")}, grid)).code == 0);
    CHECK(slurp(ws("t1.csv")) == slurp(ws("t2.csv")));
    REQUIRE(velsurf_cmd({"train", ws("a.txt"), "-o", ws("m1.txt")}).code == 0);
    REQUIRE(velsurf_cmd({"train", ws("b.txt"), "-o", ws("m2.txt")}).code == 0);
    CHECK(slurp(ws("m1.txt")) == slurp(ws("m2.txt")));
}

TEST_CASE("exit codes and error reporting") {
    Workspace ws;
    REQUIRE(velsurf_cmd({"synth", "--out-dir", ws("data"), "--n-steps", "300"}).code == 0);
    const auto files = ws.experiments();
    REQUIRE(velsurf_cmd(concat({"preprocess", "-o", ws("ds.txt")}, files)).code == 0);

    const auto none = velsurf_cmd({});
    CHECK(none.code == 1);
    CHECK(nlohmann::json::parse(none.err)["error"] == "usage");

    CHECK(velsurf_cmd({"train", ws("ds.txt"), "-o", ws("m.txt"), "--gamma", "0"}).code == 1);
    CHECK(velsurf_cmd({"train", ws("ds.txt"), "-o", ws("m.txt"), "--kernel", "linear"}).code == 1);
    CHECK(velsurf_cmd({"predict", ws("ds.txt"), "--time-ns", "1"}).code == 1);

    const auto notdata = velsurf_cmd({"train", files[0], "-o", ws("m.txt")});
    CHECK(notdata.code == 2);
    CHECK(nlohmann::json::parse(notdata.err)["exit_code"] == 2);
    CHECK_FALSE(fs::exists(ws("m.txt")));

    std::ofstream(ws("bad.csv")) << "# thickness_in=0.3\n# dt_ns=2\n0,1\n2,x\n";
    const auto bad = velsurf_cmd({"validate", ws("bad.csv")});
    CHECK(bad.code == 2);
    CHECK(nlohmann::json::parse(bad.err)["message"].get<std::string>().find("line 4") != std::string::npos);

    std::ofstream(ws("nan.csv")) << "# thickness_in=0.3\n# dt_ns=2\n0,1\n2,nan\n";
    CHECK(velsurf_cmd({"validate", ws("nan.csv"), files[0]}).code == 2);

    // non-convergence: a warning normally, exit 3 with --strict
    const auto loose = velsurf_cmd({"train", ws("ds.txt"), "-o", ws("m.txt"), "--max-iterations", "3"});
    CHECK(loose.code == 0);
    CHECK(nlohmann::json::parse(loose.err)["warning"] == "numerical");
    CHECK(velsurf_cmd({"--strict", "train", ws("ds.txt"), "-o", ws("m.txt"), "--max-iterations", "3"}).code == 3);

    // a damaged model is refused
    std::string model = slurp(ws("m.txt"));
    model[model.find("bias=") + 6] ^= 1;
    std::ofstream(ws("broken.txt"), std::ios::binary) << model;
    CHECK(velsurf_cmd({"predict", ws("broken.txt"), "--time-ns", "1", "--thickness-in", "0.3"}).code == 2);

    CHECK(velsurf_cmd({"surface", ws("m.txt"), "-o", ws("s.csv"), "--max-cells", "10"}).code == 2);
}

TEST_CASE("config file with flag precedence") {
    Workspace ws;
    REQUIRE(velsurf_cmd({"synth", "--out-dir", ws("data"), "--n-steps", "300"}).code == 0);
    REQUIRE(velsurf_cmd(concat({"preprocess", "-o", ws("ds.txt")}, ws.experiments())).code == 0);
    std::ofstream(ws("run.ini")) << "[train]\ngamma=0.7\nC=0.5\n";
    REQUIRE(velsurf_cmd({"--config", ws("run.ini"), "train", ws("ds.txt"), "-o", ws("m.txt"), "--C", "2"}).code == 0);
    const auto m = nlohmann::json::parse(slurp(ws("m.txt.manifest.json")));
    CHECK(m["parameters"]["kernel"]["gamma"] == 0.7);
    CHECK(m["parameters"]["solver"]["C"] == 2.0);

    std::ofstream(ws("typo.ini")) << "gamm=0.7\n";
    CHECK(velsurf_cmd({"--config", ws("typo.ini"), "train", ws("ds.txt"), "-o", ws("m.txt")}).code == 1);
}

TEST_CASE("version") {
    const auto v = velsurf_cmd({"--version"});
    CHECK(v.code == 0);
    CHECK(v.out.find("model format 1") != std::string::npos);
}
