#include <gtest/gtest.h>

#include <boost/asio.hpp>
#include <cstdlib>
#include <sstream>

#include "footfall/cli.hpp"
#include "test_util.hpp"

using namespace footfall;
using footfall::testing::TempDir;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::vector<json> json_lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

std::string slurp(const fs::path& p) { return nn::read_text_file(p); }

// Small, fast training flags shared by the tests below.
std::vector<std::string> quick_train(const fs::path& data, const fs::path& out) {
  return {"--train-csv", (data / "train").string(), "--test-csv", (data / "test").string(),
          "--window",    "200",                     "--stride",   "50",
          "--hidden",    "4",                       "--epochs",   "2",
          "--batch",     "16",                      "--out-dir",  out.string()};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    data = tmp / "data";
    const auto r = run_cli({"synth", "--out-dir", data.string(), "--sessions", "3", "--duration", "12", "--seed", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  TempDir tmp;
  fs::path data;
};

}  // namespace

TEST_F(CliTest, SynthIsDeterministic) {
  const fs::path other = tmp / "again";
  ASSERT_EQ(run_cli({"synth", "--out-dir", other.string(), "--sessions", "3", "--duration", "12", "--seed", "5"}).code,
            0);
  for (const char* f : {"train/session_000.csv", "train/session_002.csv", "test/session_000.csv"})
    EXPECT_EQ(slurp(data / f), slurp(other / f)) << f;
  const fs::path third = tmp / "third";
  run_cli({"synth", "--out-dir", third.string(), "--sessions", "1", "--duration", "12", "--seed", "6"});
  EXPECT_NE(slurp(data / "train/session_000.csv"), slurp(third / "train/session_000.csv"));
}

TEST_F(CliTest, TrainExportsAndTests) {
  const fs::path out = tmp / "art";
  const auto r = run_cli(cat({"train"}, quick_train(data, out)));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"weights.json", "metadata.json", "epochs.csv", "report.json", "checkpoint/weights.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;

  const auto lines = json_lines(r.out);
  std::size_t epochs = 0;
  for (const auto& j : lines)
    if (j.value("event", "") == "epoch") ++epochs;
  EXPECT_EQ(epochs, 2u);
  // The last line is the tolerance report, identical to the file.
  EXPECT_EQ(lines.back(), json::parse(slurp(out / "report.json")));

  std::istringstream csv(slurp(out / "epochs.csv"));
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "epoch,seq_loss,glob_loss,total_loss,lr,val_f1,threshold");

  const json meta = json::parse(slurp(out / "metadata.json"));
  EXPECT_EQ(meta["window_size"], 200);
  EXPECT_EQ(meta["stride"], 50);
  EXPECT_EQ(meta["scaler"]["mean"].size(), 5u);
}

TEST_F(CliTest, TestReportMatchesEvaluationModule) {
  const fs::path out = tmp / "art";
  ASSERT_EQ(run_cli(cat({"train", "--no-test"}, quick_train(data, out))).code, 0);
  const auto r = run_cli({"test", "--out-dir", out.string(), "--test-csv", (data / "test/session_000.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json got = json::parse(r.out);

  const nn::ConvLstm model = nn::load_convlstm(out / "weights.json");
  const Metadata meta = load_metadata(out / "metadata.json");
  const auto eval = evaluate_convlstm(model, meta, load_session(data / "test/session_000.csv"));
  EXPECT_EQ(got, report_to_json(eval.report));
}

TEST_F(CliTest, NoTestSkipsTester) {
  const fs::path out = tmp / "art";
  const auto r = run_cli(cat({"train", "--no-test"}, quick_train(data, out)));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "weights.json"));
  EXPECT_FALSE(fs::exists(out / "report.json"));
  EXPECT_EQ(json_lines(r.out).back()["event"], "export");
}

TEST_F(CliTest, DefaultInvocationRunsAllStages) {
  const fs::path out = tmp / "art";
  const auto r = run_cli(quick_train(data, out));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "report.json"));
}

TEST_F(CliTest, TrainTwiceIsByteIdentical) {
  const fs::path a = tmp / "a", b = tmp / "b";
  ASSERT_EQ(run_cli(cat({"train", "--no-test", "--seed", "9"}, quick_train(data, a))).code, 0);
  ASSERT_EQ(run_cli(cat({"train", "--no-test", "--seed", "9"}, quick_train(data, b))).code, 0);
  EXPECT_EQ(slurp(a / "weights.json"), slurp(b / "weights.json"));
  EXPECT_EQ(slurp(a / "metadata.json"), slurp(b / "metadata.json"));
  EXPECT_EQ(slurp(a / "epochs.csv"), slurp(b / "epochs.csv"));
}

TEST_F(CliTest, ExportOnly) {
  const fs::path out = tmp / "art";
  auto r = run_cli({"train", "--export-only", "--out-dir", out.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("checkpoint"), std::string::npos) << r.err;

  ASSERT_EQ(run_cli(cat({"train", "--no-test"}, quick_train(data, out))).code, 0);
  const std::string weights = slurp(out / "weights.json");
  fs::remove(out / "weights.json");
  fs::remove(out / "metadata.json");
  r = run_cli({"train", "--export-only", "--out-dir", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(out / "weights.json"), weights);
  EXPECT_TRUE(fs::exists(out / "metadata.json"));
}

TEST_F(CliTest, MissingMetadataNamesFile) {
  const fs::path out = tmp / "empty";
  fs::create_directories(out);
  const auto r = run_cli({"test", "--out-dir", out.string(), "--test-csv", (data / "test").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find((out / "metadata.json").string()), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingTrainFileNamesFile) {
  const auto r = run_cli({"train", "--train-csv", (tmp / "nope.csv").string(), "--out-dir", (tmp / "x").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nope.csv"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsageError) {
  auto r = run_cli({"train", "--definitely-not-a-flag"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("usage:"), std::string::npos);
  r = run_cli({"--nope"});
  EXPECT_EQ(r.code, 2);
  r = run_cli({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  r = run_cli({"test", "--model", "svm"});
  EXPECT_EQ(r.code, 2);
  r = run_cli({"baseline", "--model", "convlstm"});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, HelpExitsZero) {
  const auto r = run_cli({"train", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--no-test"), std::string::npos);
}

TEST_F(CliTest, ZeroEpochsHasNothingToExport) {
  auto args = quick_train(data, tmp / "art");
  args[std::find(args.begin(), args.end(), "--epochs") - args.begin() + 1] = "0";
  const auto r = run_cli(cat({"train", "--no-test"}, args));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("checkpoint"), std::string::npos);
}

TEST_F(CliTest, DataDirFromEnvironment) {
  const fs::path env_dir = tmp / "envdata";
  ::setenv(cli::kDataDirEnv, env_dir.string().c_str(), 1);
  auto r = run_cli({"synth", "--sessions", "2", "--duration", "12"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(env_dir / "train/session_001.csv"));
  r = run_cli({"train", "--window", "200", "--stride", "50", "--hidden", "4", "--epochs", "1", "--out-dir",
               (tmp / "art").string()});
  ::unsetenv(cli::kDataDirEnv);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(tmp / "art/report.json"));
}

TEST_F(CliTest, BaselineTrainsAndTests) {
  for (const char* kind : {"logistic", "cnn"}) {
    const fs::path out = tmp / kind;
    const auto r = run_cli({"baseline", "--model", kind, "--train-csv", (data / "train").string(), "--test-csv",
                            (data / "test").string(), "--epochs", "1", "--out-dir", out.string()});
    ASSERT_EQ(r.code, 0) << kind << ": " << r.err;
    EXPECT_EQ(json::parse(slurp(out / "metadata.json"))["window_size"], 50);
    const auto t = run_cli({"test", "--model", kind, "--out-dir", out.string(), "--test-csv", (data / "test").string()});
    ASSERT_EQ(t.code, 0) << t.err;
    EXPECT_EQ(json::parse(t.out), json::parse(slurp(out / "report.json")));
  }
}

TEST_F(CliTest, ReplaySendsOscPerDetection) {
  const fs::path out = tmp / "art";
  ASSERT_EQ(run_cli(cat({"train", "--no-test"}, quick_train(data, out))).code, 0);

  namespace ip = boost::asio::ip;
  boost::asio::io_context io;
  ip::udp::socket rx(io, ip::udp::endpoint(ip::address_v4::loopback(), 0));
  const std::string dest = "127.0.0.1:" + std::to_string(rx.local_endpoint().port());
  const auto r = run_cli({"replay", "--out-dir", out.string(), "--test-csv", (data / "test").string(), "--osc-dest",
                          dest, "--sample-threshold", "0.0", "--window-threshold", "0.0", "--required-hits", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json summary = json_lines(r.out).back();
  ASSERT_EQ(summary["event"], "replay");
  const std::size_t n = summary["detections"];
  ASSERT_GT(n, 0u);
  EXPECT_EQ(summary["osc_sent"], n);
  EXPECT_EQ(summary["tp"].get<std::size_t>() + summary["fp"].get<std::size_t>(), n);

  rx.non_blocking(true);
  std::size_t received = 0;
  std::array<std::uint8_t, 64> buf{};
  boost::system::error_code ec;
  while (rx.receive(boost::asio::buffer(buf), 0, ec) == 24 && !ec) ++received;
  EXPECT_EQ(received, n);
}

TEST_F(CliTest, ServeRunsFixedPasses) {
  const fs::path out = tmp / "art";
  ASSERT_EQ(run_cli(cat({"train", "--no-test"}, quick_train(data, out))).code, 0);
  const auto r = run_cli({"serve", "--out-dir", out.string(), "--test-csv", (data / "test").string(), "--listen",
                          "127.0.0.1:0", "--rate", "0", "--loops", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t passes = 0;
  for (const auto& j : json_lines(r.out)) {
    if (j["event"] == "listening") EXPECT_GT(j["port"].get<int>(), 0);
    if (j["event"] == "replay") ++passes;
  }
  EXPECT_EQ(passes, 2u);
}
