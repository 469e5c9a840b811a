#include "fixtures.hpp"

#include "sdcnpu/cli/commands.hpp"
#include "sdcnpu/reliability/model.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <functional>
#include <sstream>

using namespace sdcnpu;
namespace fs = std::filesystem;
namespace st = sdcnpu::testing;

namespace
{

struct Result
{
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text)
{
    std::ofstream o(p, std::ios::binary);
    o << text;
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep))
        out.push_back(cell);
    return out;
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

/// Copy of a shipped config with an absolute workload path and `edit` applied.
fs::path variant(const fs::path& dir, const std::string& base, const std::function<void(nlohmann::json&)>& edit)
{
    auto j = nlohmann::json::parse(slurp(st::config_path(base)));
    j["workload"] = (st::config_path(base).parent_path() / j["workload"].get<std::string>()).string();
    edit(j);
    const auto p = dir / "config.json";
    spit(p, j.dump(2));
    return p;
}

std::string stats_csv(const std::vector<std::tuple<std::string, int, long, double>>& rows)
{
    std::string s = "block,K,N,sdc_sum,sdc_mean,ci_low,ci_high,ci_halfwidth,crash_rate,masked,sdc,crash\n";
    for (const auto& [b, k, n, sum] : rows)
    {
        const double mean = sum / k;
        s += b + "," + std::to_string(k) + "," + std::to_string(n) + "," + std::to_string(sum) + "," +
             std::to_string(mean) + "," + std::to_string(mean * 0.5) + "," + std::to_string(std::min(1.0, mean * 1.5)) +
             ",0.1,0," + std::to_string(k) + ",0,0\n";
    }
    return s;
}

const std::string kToy = st::config_path("toy-dense.json").string();
const std::string kTiny = st::config_path("tiny-cnn.json").string();

} // namespace

TEST(CliSites, TinyCnnTable)
{
    const auto r = run({"sites", "--config", kTiny});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ls = lines(r.out);
    ASSERT_EQ(ls.size(), 8u);
    const std::vector<std::pair<std::string, std::string>> want = {
        {"AO", "74880"}, {"DMA", "116480"}, {"MAC", "199680"}, {"REG", "266240"},
        {"TSU", "58240"}, {"WD", "58240"},   {"total", "773760"}};
    for (std::size_t i = 0; i < want.size(); ++i)
    {
        std::istringstream in(ls[i + 1]);
        std::string name, bits, cycles, n;
        in >> name >> bits >> cycles >> n;
        EXPECT_EQ(name, want[i].first);
        EXPECT_EQ(n, want[i].second);
        if (i < 6)
        {
            EXPECT_EQ(cycles, "1040");
        }
    }
}

TEST(CliErrors, ConfigAndIo)
{
    const auto dir = st::scratch_dir("cli_errors");
    const auto bad = variant(dir, "toy-dense.json", [](auto& j) { j["npu"]["bogus"] = 1; });
    const auto r = run({"sites", "--config", bad.string()});
    EXPECT_EQ(r.code, cli::kExitUsage);
    EXPECT_NE(r.err.find("npu.bogus"), std::string::npos) << r.err;

    const auto range = variant(dir, "toy-dense.json", [](auto& j) { j["npu"]["mac_rows"] = 9; });
    const auto r2 = run({"sites", "--config", range.string()});
    EXPECT_EQ(r2.code, cli::kExitUsage);
    EXPECT_NE(r2.err.find("npu.mac_rows"), std::string::npos) << r2.err;

    EXPECT_EQ(run({"sites", "--config", (dir / "missing.json").string()}).code, cli::kExitIo);
    EXPECT_EQ(run({"sites"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"optimize", "--config", kToy, "--budget", "5", "--target", "asil-d"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"estimate", "--config", kToy, "--out", (dir / "nothing").string()}).code, cli::kExitIo);
}

TEST(CliInject, SingleRun)
{
    const auto r = run({"inject", "--config", kToy, "--block", "REG", "--reg", "cfg7", "--bit", "3", "--cycle", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("masked"), std::string::npos) << r.out;
    EXPECT_EQ(run({"inject", "--config", kToy, "--block", "REG", "--reg", "cfg9", "--bit", "0", "--cycle", "0"}).code,
              cli::kExitUsage);
}

TEST(CliCampaign, RerunIsByteIdenticalAndResumeMatches)
{
    const auto a = st::scratch_dir("cli_campaign_a"), b = st::scratch_dir("cli_campaign_b");
    ASSERT_EQ(run({"campaign", "--config", kToy, "--out", a.string()}).code, 0);
    const auto records = slurp(a / "records.log"), stats = slurp(a / "stats.csv");
    ASSERT_EQ(run({"campaign", "--config", kToy, "--out", a.string(), "--jobs", "4"}).code, 0);
    EXPECT_EQ(slurp(a / "records.log"), records);
    EXPECT_EQ(slurp(a / "stats.csv"), stats);

    const auto partial = run({"campaign", "--config", kToy, "--out", b.string(), "--max-runs", "100"});
    EXPECT_EQ(partial.code, cli::kExitInterrupted);
    EXPECT_FALSE(fs::exists(b / "stats.csv"));
    ASSERT_EQ(run({"campaign", "--config", kToy, "--out", b.string(), "--resume", "--jobs", "2"}).code, 0);
    EXPECT_EQ(slurp(b / "records.log"), records);
    EXPECT_EQ(slurp(b / "stats.csv"), stats);
}

TEST(CliEstimate, ZeroStatsMeetTarget)
{
    const auto dir = st::scratch_dir("cli_estimate_zero");
    spit(dir / "stats.csv", stats_csv({{"AO", 10, 1000, 0.0}, {"TSU", 5, 500, 0.0}}));
    const auto r = run({"estimate", "--config", kToy, "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = slurp(dir / "estimate.csv");
    EXPECT_NE(csv.find("sdc_npu=0 "), std::string::npos) << csv;
    EXPECT_NE(csv.find("meets=yes"), std::string::npos);
}

TEST(CliEstimate, HandToyAndLogicColumn)
{
    const auto dir = st::scratch_dir("cli_estimate_toy");
    const auto cfg = variant(dir, "toy-dense.json", [](auto&) {});
    spit(dir / "stats.csv", stats_csv({{"AO", 10, 1000, 5.0}, {"DMA", 8, 2000, 2.0}}));
    ASSERT_EQ(run({"estimate", "--config", cfg.string(), "--out", dir.string(), "--logic-faults"}).code, 0);
    const double p = reliability::fault_probability(50.0, 1e9);
    const auto ls = lines(slurp(dir / "estimate.csv"));
    ASSERT_EQ(ls.size(), 5u);
    const auto ao = split(ls[1], ','), dma = split(ls[2], ','), total = split(ls[3], ',');
    EXPECT_EQ(ao[0], "AO");
    EXPECT_NEAR(std::stod(ao[6]) / (p * 500.0), 1.0, 1e-12);
    EXPECT_NEAR(std::stod(dma[6]) / (p * 500.0), 1.0, 1e-12);
    EXPECT_NEAR(std::stod(total[6]) / (p * 1000.0), 1.0, 1e-12);
    for (const auto& row : {ao, dma, total})
        EXPECT_GE(std::stod(row[7]), std::stod(row[6]));
    EXPECT_GT(std::stod(ao[5]), std::stod(ao[4]));
    EXPECT_NE(ls[4].find("active=logic"), std::string::npos);
}

TEST(CliOptimize, BudgetZeroAndTargetMode)
{
    const auto dir = st::scratch_dir("cli_optimize");
    spit(dir / "stats.csv", stats_csv({{"AO", 10, 1000, 5.0}, {"TSU", 10, 1000, 9.0}, {"WD", 10, 1000, 1.0}}));
    ASSERT_EQ(run({"optimize", "--config", kToy, "--out", dir.string(), "--budget", "0"}).code, 0);
    const auto ls = lines(slurp(dir / "optimize.csv"));
    ASSERT_EQ(ls.size(), 3u);
    EXPECT_NE(ls[0].find("feasible=yes"), std::string::npos);
    const auto row = split(ls[2], ',');
    EXPECT_EQ(std::vector<std::string>(row.end() - 6, row.end()), std::vector<std::string>(6, "0"));

    ASSERT_EQ(run({"optimize", "--config", kToy, "--out", dir.string(), "--target", "asil-d"}).code, 0);
    bool has_zero = false;
    for (const auto& l : lines(slurp(dir / "frontier.csv")))
        if (split(l, ',').size() > 2 && split(l, ',')[2] == "0")
            has_zero = true;
    EXPECT_TRUE(has_zero);
}

TEST(CliOptimize, InfeasibleAndMissingStats)
{
    const auto dir = st::scratch_dir("cli_optimize_infeasible");
    const auto cfg = variant(dir, "toy-dense.json", [](auto& j) { j["protection"]["schemes"] = {"none", "quatro"}; });
    spit(dir / "stats.csv", stats_csv({{"TSU", 1, 100000000000000L, 1.0}}));
    const auto r = run({"optimize", "--config", cfg.string(), "--out", dir.string(), "--target", "asil-d"});
    EXPECT_EQ(r.code, cli::kExitInfeasible) << r.out << r.err;
    EXPECT_NE(slurp(dir / "optimize.csv").find("feasible=no"), std::string::npos);
    EXPECT_FALSE(slurp(dir / "frontier.csv").empty());
    fs::remove(dir / "stats.csv");
    EXPECT_EQ(run({"optimize", "--config", cfg.string(), "--out", dir.string(), "--budget", "5"}).code, cli::kExitIo);
}

TEST(CliOptimize, TwoBlockBruteForce)
{
    const auto dir = st::scratch_dir("cli_optimize_two");
    const auto cfg = variant(dir, "toy-dense.json", [](auto& j) { j["protection"]["schemes"] = {"none", "dmr"}; });
    spit(dir / "stats.csv", stats_csv({{"AO", 10, 1000, 3.0}, {"DMA", 10, 1000, 7.0}}));
    // Baseline area 100; DMR with the MAC-32 16nm checker adds 1.073 x block area.
    const double p = reliability::fault_probability(50.0, 1e9);
    const double area[2] = {6.0 * 1.073, 8.0 * 1.073}, sdc[2] = {300.0 * p, 700.0 * p};
    for (double budget : {0.0, 5.0, 7.0, 10.0, 20.0})
    {
        int best = -1;
        double best_sdc = 0, best_area = 0;
        for (int m = 0; m < 4; ++m)
        {
            double a = 100.0, s = 0.0;
            for (int k = 0; k < 2; ++k)
                if (m >> (1 - k) & 1)
                    a += area[k];
                else
                    s += sdc[k];
            if (a > 100.0 * (1.0 + budget / 100.0) + 1e-9)
                continue;
            if (best < 0 || s < best_sdc || (s == best_sdc && a < best_area))
                best = m, best_sdc = s, best_area = a;
        }
        ASSERT_EQ(run({"optimize", "--config", cfg.string(), "--out", dir.string(), "--budget", std::to_string(budget)})
                      .code,
                  0);
        const auto row = split(lines(slurp(dir / "optimize.csv")).at(2), ',');
        EXPECT_EQ(row[4], (best >> 1 & 1) ? "2" : "0") << budget;
        EXPECT_EQ(row[5], (best & 1) ? "2" : "0") << budget;
        for (std::size_t i = 6; i < 10; ++i)
            EXPECT_EQ(row[i], "0");
        EXPECT_NEAR(std::stod(row[0]), best_area, 1e-9);
    }
}
