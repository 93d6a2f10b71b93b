#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include "ddcnn/dataset.hpp"
#include "ddcnn/image.hpp"
#include "test_util.hpp"

namespace {

std::string cli_bin() {
    const char* bin = std::getenv("DDCNN_CLI_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "DDCNN_CLI_BIN must point at the ddcnn binary");
    return bin;
}

struct CmdResult {
    int exit_code = -1;
    std::string output;
};

CmdResult run_cli(const std::string& args) {
    const std::string command = cli_bin() + " " + args + " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult result;
    char buffer[4096];
    while (std::size_t n = std::fread(buffer, 1, sizeof(buffer), pipe)) {
        result.output.append(buffer, n);
    }
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// one corpus + one trained model shared by the whole file
struct Workspace {
    testutil::TempDir dir;
    std::filesystem::path corpus;
    std::filesystem::path run;
    std::string weights;
    std::string common;

    Workspace() {
        corpus = dir.path() / "corpus";
        run = dir.path() / "run";
        auto synth = run_cli("synth --out " + corpus.string() +
                             " --drivers 3 --images-per-class 3 --seed 7");
        REQUIRE(synth.exit_code == 0);

        common = " --dataset-root " + corpus.string() + " --model cnn --input-size 32" +
                 " --cnn-filters 4,8,8,8 --hidden-units 16 --val-fraction 0.34" +
                 " --seed 5";
        auto train = run_cli("train" + common + " --epochs 2 --batch-size 10" +
                             " --no-augment --output-dir " + run.string());
        REQUIRE_MESSAGE(train.exit_code == 0, train.output);
        REQUIRE(train.output.find("trainable parameters") != std::string::npos);
        weights = (run / "cnn.ddwt").string();
    }
};

Workspace& workspace() {
    static Workspace ws;
    return ws;
}

} // namespace

TEST_CASE("train writes weights, history, and the resolved config") {
    auto& ws = workspace();
    CHECK(std::filesystem::exists(ws.weights));
    CHECK(std::filesystem::exists(ws.run / "history.csv"));
    CHECK(std::filesystem::exists(ws.run / "resolved_config.cfg"));

    const auto history = read_file(ws.run / "history.csv");
    CHECK(history.find("epoch,train_loss,train_acc,val_acc") == 0);
    int rows = 0;
    for (char c : history) rows += c == '\n';
    CHECK(rows == 3);  // header + 2 epochs

    const auto resolved = read_file(ws.run / "resolved_config.cfg");
    CHECK(resolved.find("model = cnn") != std::string::npos);
    CHECK(resolved.find("batch_size = 10") != std::string::npos);
    CHECK(resolved.find("leaky_split = false") != std::string::npos);
}

TEST_CASE("training reruns are byte-identical for the same config and seed") {
    auto& ws = workspace();
    const auto rerun = ws.dir.path() / "rerun";
    auto result = run_cli("train" + ws.common + " --epochs 2 --batch-size 10" +
                          " --no-augment --output-dir " + rerun.string());
    REQUIRE_MESSAGE(result.exit_code == 0, result.output);
    CHECK(read_file(rerun / "history.csv") == read_file(ws.run / "history.csv"));
    CHECK(read_file(rerun / "cnn.ddwt") == read_file(ws.run / "cnn.ddwt"));
}

TEST_CASE("eda produces counts, averages, and difference images") {
    auto& ws = workspace();
    const auto out = ws.dir.path() / "eda";
    auto result = run_cli("eda --dataset-root " + ws.corpus.string() +
                          " --input-size 32 --pair c0,c1 --pair c0,c0 --output-dir " +
                          out.string());
    REQUIRE_MESSAGE(result.exit_code == 0, result.output);

    const auto counts = read_file(out / "class_counts.csv");
    CHECK(counts.find("classname,count") == 0);
    std::size_t total = 0;
    std::istringstream ss(counts);
    std::string line;
    std::getline(ss, line);
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        total += std::stoull(line.substr(line.find(',') + 1));
    }
    CHECK(total == 3 * 10 * 3);

    for (int k = 0; k < 10; ++k) {
        CHECK(std::filesystem::exists(out / ("avg_c" + std::to_string(k) + ".pgm")));
    }
    CHECK(std::filesystem::exists(out / "diff_c0_c1.pgm"));

    // diff of a class with itself is the zero image
    auto zero = ddcnn::decode_image(out / "diff_c0_c0.pgm");
    for (auto v : zero.pixels) CHECK(v == 0);
}

TEST_CASE("evaluate writes report files and a 10-class summary") {
    auto& ws = workspace();
    const auto out = ws.dir.path() / "eval";
    auto result = run_cli("evaluate" + ws.common + " --weights " + ws.weights +
                          " --output-dir " + out.string());
    REQUIRE_MESSAGE(result.exit_code == 0, result.output);

    const auto report = nlohmann::json::parse(read_file(out / "report.json"));
    CHECK(report["per_class_accuracy"].size() == 10);
    const double overall = report["overall_accuracy"].get<double>();
    CHECK(overall >= 0.0);
    CHECK(overall <= 1.0);
    CHECK(report["confusion"].size() == 10);
    CHECK(std::filesystem::exists(out / "confusion.csv"));

    int class_lines = 0;
    std::istringstream ss(result.output);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.find("accuracy") != std::string::npos && line.find("  c") == 0) {
            ++class_lines;
        }
    }
    CHECK(class_lines == 10);
}

TEST_CASE("evaluate exits 3 when weights do not match the model") {
    auto& ws = workspace();
    const auto out = ws.dir.path() / "eval_bad";
    // cnn-opt has one fewer pool, so dense1 disagrees in shape
    auto result = run_cli("evaluate --dataset-root " + ws.corpus.string() +
                          " --model cnn-opt --input-size 32 --cnn-filters 4,8,8,8" +
                          " --hidden-units 16 --weights " + ws.weights +
                          " --output-dir " + out.string());
    CHECK(result.exit_code == 3);
}

TEST_CASE("predict prints the argmax line and a probability vector") {
    auto& ws = workspace();
    const std::string image = (ws.corpus / "c3" / "p001_0000.pgm").string();
    auto result = run_cli("predict" + ws.common + " --weights " + ws.weights +
                          " --image " + image);
    REQUIRE_MESSAGE(result.exit_code == 0, result.output);

    std::istringstream ss(result.output);
    std::string first, second;
    REQUIRE(std::getline(ss, first));
    REQUIRE(std::getline(ss, second));

    std::istringstream head(first);
    std::string classname;
    double probability = -1.0;
    head >> classname >> probability;
    CHECK(classname.size() == 2);
    CHECK(classname[0] == 'c');
    CHECK(probability >= 0.0);
    CHECK(probability <= 1.0);

    const auto vector = nlohmann::json::parse(second);
    REQUIRE(vector.size() == 10);
    double sum = 0.0;
    double best = -1.0;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < 10; ++k) {
        const double p = vector[k].get<double>();
        sum += p;
        if (p > best) {
            best = p;
            best_k = k;
        }
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
    CHECK(("c" + std::to_string(best_k)) == classname);
    CHECK(std::abs(probability - best) <= 5e-7);  // line 1 is printed at %.6f

    auto again = run_cli("predict" + ws.common + " --weights " + ws.weights +
                         " --image " + image);
    CHECK(again.output == result.output);
}

TEST_CASE("predict exits 2 on an undecodable image") {
    auto& ws = workspace();
    const auto junk = ws.dir.path() / "junk.jpg";
    std::ofstream(junk) << "not an image";
    auto result = run_cli("predict" + ws.common + " --weights " + ws.weights +
                          " --image " + junk.string());
    CHECK(result.exit_code == 2);
}

TEST_CASE("benchmark respects the latency budget contract") {
    auto& ws = workspace();
    const std::string image = (ws.corpus / "c0" / "p001_0000.pgm").string();

    auto pass = run_cli("benchmark" + ws.common + " --weights " + ws.weights +
                        " --image " + image + " --warmup 2 --iterations 10");
    REQUIRE_MESSAGE(pass.exit_code == 0, pass.output);
    CHECK(pass.output.find("PASS") != std::string::npos);

    auto fail = run_cli("benchmark" + ws.common + " --weights " + ws.weights +
                        " --image " + image + " --warmup 0 --iterations 3 --budget 0");
    CHECK(fail.exit_code == 4);
    CHECK(fail.output.find("FAIL") != std::string::npos);
}

TEST_CASE("single-member ensemble equals plain evaluation") {
    auto& ws = workspace();
    const auto eval_out = ws.dir.path() / "ens_eval";
    auto eval_result = run_cli("evaluate" + ws.common + " --weights " + ws.weights +
                               " --output-dir " + eval_out.string());
    REQUIRE(eval_result.exit_code == 0);

    const auto single_out = ws.dir.path() / "ens_single";
    auto single = run_cli("ensemble" + ws.common + " --member cnn=" + ws.weights +
                          " --output-dir " + single_out.string());
    REQUIRE_MESSAGE(single.exit_code == 0, single.output);
    CHECK(read_file(single_out / "confusion.csv") ==
          read_file(eval_out / "confusion.csv"));

    const auto dup_out = ws.dir.path() / "ens_dup";
    auto dup = run_cli("ensemble" + ws.common + " --member cnn=" + ws.weights +
                       " --member cnn=" + ws.weights + " --output-dir " +
                       dup_out.string());
    REQUIRE_MESSAGE(dup.exit_code == 0, dup.output);
    CHECK(read_file(dup_out / "confusion.csv") == read_file(eval_out / "confusion.csv"));
}

TEST_CASE("leaky-split flag is accepted and recorded") {
    auto& ws = workspace();
    const auto out = ws.dir.path() / "leaky";
    auto result = run_cli("train" + ws.common + " --epochs 1 --batch-size 10" +
                          " --no-augment --leaky-split --output-dir " + out.string());
    REQUIRE_MESSAGE(result.exit_code == 0, result.output);
    CHECK(result.output.find("leaky") != std::string::npos);
    CHECK(read_file(out / "resolved_config.cfg").find("leaky_split = true") !=
          std::string::npos);
}

TEST_CASE("error exit codes are stable") {
    auto& ws = workspace();
    SUBCASE("missing dataset is an input error (2)") {
        auto result = run_cli("eda --dataset-root /nonexistent/path --output-dir " +
                              (ws.dir.path() / "x").string());
        CHECK(result.exit_code == 2);
    }
    SUBCASE("unknown config key is a config error (3)") {
        const auto config = ws.dir.path() / "bad.cfg";
        std::ofstream(config) << "not_a_real_key = 1\n";
        auto result = run_cli("train --config " + config.string());
        CHECK(result.exit_code == 3);
    }
    SUBCASE("unknown model flag value is a config error (3)") {
        auto result = run_cli("train --model resnet99");
        CHECK(result.exit_code == 3);
    }
    SUBCASE("flags override config file values") {
        const auto config = ws.dir.path() / "override.cfg";
        std::ofstream(config) << "model = cnn\nseed = 1\n"
                              << "dataset_root = " << ws.corpus.string() << "\n"
                              << "input_size = 32\ncnn_filters = 4,8,8,8\n"
                              << "hidden_units = 16\nval_fraction = 0.34\n"
                              << "augment = false\nepochs = 1\nbatch_size = 10\n";
        const auto out = ws.dir.path() / "override_run";
        auto result = run_cli("train --config " + config.string() + " --seed 9" +
                              " --output-dir " + out.string());
        REQUIRE_MESSAGE(result.exit_code == 0, result.output);
        const auto resolved = read_file(out / "resolved_config.cfg");
        CHECK(resolved.find("seed = 9") != std::string::npos);  // flag beat the file
    }
}
