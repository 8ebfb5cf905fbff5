// Exercises the CLI binary end to end: artifact layout, determinism, exit codes.
// Usage: cli_tests <path-to-gnmr-binary> <scratch-dir>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
    std::printf("%s %s\n", ok ? "ok  " : "FAIL", what.c_str());
    if (!ok) ++failures;
}

int run(const std::string& cmd) {
    const int rc = std::system((cmd + " > cli_stdout.txt 2> cli_stderr.txt").c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// loss column of a trainlog.csv (skips the config comment and header)
std::string loss_column(const fs::path& p) {
    std::ifstream in(p);
    std::string line, out;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        out += line.substr(c1 + 1, c2 - c1 - 1) + "\n";
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: cli_tests <gnmr-binary> <scratch-dir>\n");
        return 2;
    }
    const std::string gnmr = fs::absolute(argv[1]).string();
    fs::remove_all(argv[2]);
    fs::create_directories(argv[2]);
    fs::current_path(argv[2]);
    if (run(gnmr + " --help") != 0) {
        std::fprintf(stderr, "cannot execute '%s'\n", gnmr.c_str());
        return 2;
    }

    const std::string synth_flags =
        " synth --users 40 --items 120 --behaviors 2 --rho 0.8 --seed 7 --out ";
    check(run(gnmr + synth_flags + "data") == 0, "synth exits 0");
    check(run(gnmr + synth_flags + "data2") == 0, "synth rerun exits 0");
    check(slurp("data/events.tsv") == slurp("data2/events.tsv"),
          "synth rerun is byte-identical (events)");
    check(slurp("data/manifest.json") == slurp("data2/manifest.json"),
          "synth rerun is byte-identical (manifest)");
    {
        const json m = json::parse(slurp("data/manifest.json"));
        check(m.contains("run_config"), "manifest embeds its run config");
        check(m.at("density").get<double>() > 0, "manifest records density");
    }

    check(run(gnmr + " synth --users 60 --items 100 --rho 0 --seed 5 --out rho0") == 0,
          "synth rho=0 exits 0");
    check(run(gnmr + " synth --users 60 --items 100 --rho 1 --seed 5 --out rho1") == 0,
          "synth rho=1 exits 0");
    {
        const double c0 =
            json::parse(slurp("rho0/manifest.json")).at("aux_target_correlation").get<double>();
        const double c1 =
            json::parse(slurp("rho1/manifest.json")).at("aux_target_correlation").get<double>();
        check(std::abs(c0) < 0.06, "rho=0 manifest reports near-zero correlation");
        check(c1 > 0.5, "rho=1 manifest reports strong correlation");
    }

    const std::string train_flags =
        " train --data data/events.tsv --epochs 6 --pretrain-epochs 30 --seed 3 --out ";
    check(run(gnmr + train_flags + "run1") == 0, "train exits 0");
    for (const char* f : {"best.ckpt", "trainlog.csv", "split.json", "idmaps.json"})
        check(fs::exists(fs::path("run1") / f), std::string("train writes ") + f);
    {
        const json ck = json::parse(slurp("run1/best.ckpt"));
        check(ck.contains("run_config"), "checkpoint embeds its run config");
        check(ck.at("hyper").at("embed_dim") == 16, "checkpoint records hyperparameters");
    }

    check(run(gnmr + train_flags + "run2") == 0, "train rerun exits 0");
    check(slurp("run1/best.ckpt") == slurp("run2/best.ckpt"),
          "train rerun reproduces the checkpoint byte for byte");
    check(!loss_column("run1/trainlog.csv").empty() &&
              loss_column("run1/trainlog.csv") == loss_column("run2/trainlog.csv"),
          "train rerun reproduces the loss column");

    check(run(gnmr + " train --data data/events.tsv --epochs 2 --pretrain-epochs 10 --layers 0"
                " --seed 3 --out depth0") == 0,
          "depth-0 training works");
    check(run(gnmr + " train --data data/events.tsv --epochs 2 --pretrain-epochs 10"
                " --behaviors-use target --seed 3 --out onlyt") == 0,
          "only-target training works");

    const std::string eval_flags = " evaluate --ckpt run1/best.ckpt --data data/events.tsv --out ";
    check(run(gnmr + eval_flags + "eval1") == 0, "evaluate exits 0");
    check(run(gnmr + eval_flags + "eval2") == 0, "evaluate rerun exits 0");
    check(slurp("eval1/report.json") == slurp("eval2/report.json"),
          "evaluate rerun is byte-identical");
    {
        const json rep = json::parse(slurp("eval1/report.json"));
        check(rep.at("report").at("cutoffs").size() == 6, "default cutoffs 1,3,5,7,9,10");
    }
    check(run(gnmr + " evaluate --ckpt run1/best.ckpt --data data/events.tsv"
                " --cutoffs 1,3,5,7,9 --baseline popularity --out eval3") == 0,
          "cutoff list and baseline accepted");
    {
        const json rep = json::parse(slurp("eval3/report.json"));
        check(rep.at("report").at("cutoffs").size() == 5, "custom cutoffs respected");
        check(rep.contains("popularity_baseline"), "baseline row included");
        const std::string table = slurp("cli_stdout.txt");
        check(table.find("popularity baseline:") != std::string::npos, "baseline table printed");
    }

    // config file provides defaults, flags win
    {
        std::ofstream cf("conf.json");
        cf << R"({"dim": 8, "heads": 2, "epochs": 2, "pretrain_epochs": 10})";
    }
    check(run(gnmr + " train --config conf.json --data data/events.tsv --seed 3 --out cfg1") == 0,
          "config file accepted");
    check(json::parse(slurp("cfg1/best.ckpt")).at("hyper").at("embed_dim") == 8,
          "config file sets the embedding dim");
    check(run(gnmr + " train --config conf.json --dim 16 --data data/events.tsv --seed 3"
                " --out cfg2") == 0,
          "flag on top of config accepted");
    check(json::parse(slurp("cfg2/best.ckpt")).at("hyper").at("embed_dim") == 16,
          "explicit flag overrides the config file");

    // exit codes
    check(run(gnmr + " train --data data/events.tsv --dim 10 --heads 4 --layers 9 --out bad") == 2,
          "invalid flag combination exits 2");
    check(slurp("cli_stderr.txt").find("not divisible") != std::string::npos &&
              slurp("cli_stderr.txt").find("layers") != std::string::npos,
          "all config problems reported at once");
    check(run(gnmr + " train --data missing.tsv --out bad") == 3, "missing data exits 3");
    check(run(gnmr + " evaluate --ckpt nonexistent.ckpt --data data/events.tsv") == 3,
          "missing checkpoint exits 3");
    check(run(gnmr + " nonsense") == 2, "unknown subcommand exits 2");

    // ablation grid
    check(run(gnmr + " ablate --data data/events.tsv --epochs 2 --pretrain-epochs 10 --seed 3"
                " --seeds 1 --out abl") == 0,
          "ablate exits 0");
    {
        const json abl = json::parse(slurp("abl/ablate.json"));
        const auto& rows = abl.at("rows");
        check(rows.size() == 9, "grid has full, -be, -ma, wo-*, only-target and 4 depths");
        check(rows[0].at("variant") == "full" && rows[1].at("variant") == "-be" &&
                  rows[2].at("variant") == "-ma",
              "row order is deterministic");
        bool all_scored = true;
        for (const auto& r : rows) all_scored = all_scored && r.contains("hr10");
        check(all_scored, "every variant trained and scored");
        check(fs::exists("abl/full-s3.ckpt") && fs::exists("abl/depth-0-s3.ckpt"),
              "per-variant checkpoints written");
    }

    std::printf("%s\n", failures == 0 ? "ALL CLI TESTS PASSED" : "CLI TESTS FAILED");
    return failures == 0 ? 0 : 1;
}
