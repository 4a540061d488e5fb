#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::string& args)
{
    const std::string cmd = std::string("\"") + DRSF_CLI + "\" " + args + " 2>/dev/null";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("drsf_cli_" + name))
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& leaf) const { return (path / leaf).string(); }
};

}  // namespace

TEST_CASE("usage errors exit with 2")
{
    CHECK(run("") != 0);
    CHECK(run("frobnicate") == 2);
    CHECK(run("samples --bogus") == 2);
    TempDir dir("usage");
    CHECK(run("simulate --config " + dir.str("missing.json") + " --out " + dir.str("out")) == 2);
    CHECK_FALSE(fs::exists(dir.path / "out"));
}

TEST_CASE("samples, bounds and filter pipeline")
{
    TempDir dir("pipeline");
    REQUIRE(run("samples --seed 3 --n 20 --sigma 0.3 --out " + dir.str("s")) == 0);
    for (const char* f : {"voltage.csv", "current.csv", "substation.csv"}) CHECK(fs::exists(dir.path / "s" / f));

    REQUIRE(run("bounds --samples " + dir.str("s/substation.csv") + " --kind substation --alpha 0.1 --epsilon 0 --out " +
                dir.str("b.json")) == 0);
    const auto b = json::parse(slurp(dir.path / "b.json"));
    CHECK(b.at("kind").get<std::string>() == "substation");
    CHECK(b.at("certified_prob").get<double>() >= 0.9 - 1e-12);

    REQUIRE(run("bounds --samples-dir " + dir.str("s") + " --alpha 0.1 --epsilon 0 --out " + dir.str("set.json")) == 0);
    const auto set = json::parse(slurp(dir.path / "set.json"));
    CHECK(set.at("voltage").at("upper").size() == 33);

    {
        std::ofstream a(dir.path / "a.json");
        a << "[0, 0, 0, 0, 0]";
    }
    REQUIRE(run("filter --action " + dir.str("a.json") + " --bounds " + dir.str("set.json") + " --load-scale 0.6 --out " +
                dir.str("f.json")) == 0);
    const auto f = json::parse(slurp(dir.path / "f.json"));
    CHECK(f.at("q_safe").size() == 5);

    {
        std::ofstream a(dir.path / "bad.json");
        a << "[0, 0]";
    }
    CHECK(run("filter --action " + dir.str("bad.json") + " --nominal") == 1);
}

TEST_CASE("simulate writes reproducible reports")
{
    TempDir dir("simulate");
    {
        std::ofstream c(dir.path / "c.json");
        c << R"({"horizon": 3, "sigma": 0.3, "seed": 4, "samples": 10, "epsilon": 0.0, "record_timing": false})";
    }
    REQUIRE(run("simulate --config " + dir.str("c.json") + " --out " + dir.str("r1")) == 0);
    REQUIRE(run("simulate --config " + dir.str("c.json") + " --out " + dir.str("r2")) == 0);
    CHECK(slurp(dir.path / "r1" / "report.csv") == slurp(dir.path / "r2" / "report.csv"));
    const auto rep = json::parse(slurp(dir.path / "r1" / "report.json"));
    CHECK_FALSE(rep.is_null());

    {
        std::ofstream c(dir.path / "bad.json");
        c << R"({"horizon": 3, "colour": "red"})";
    }
    CHECK(run("simulate --config " + dir.str("bad.json") + " --out " + dir.str("r3")) == 2);
}

TEST_CASE("bench reports timings")
{
    TempDir dir("bench");
    REQUIRE(run("bench --repeats 2 --out " + dir.str("b.json")) == 0);
    const auto b = json::parse(slurp(dir.path / "b.json"));
    CHECK(b.at("filter_mean_s").get<double>() > 0.0);
}
