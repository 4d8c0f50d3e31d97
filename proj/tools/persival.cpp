#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "persival/orchestrator.hpp"

namespace {

// 0: ran, post-condition held everywhere. 2: ran, violations observed (a
// finding). 1: infrastructure error.
constexpr int kHeld = 0;
constexpr int kInfraError = 1;
constexpr int kViolations = 2;

int finish_run(const persival::RunReport& report, bool quiet) {
  if (!quiet) std::fputs(persival::render_report_text(report).c_str(), stdout);
  return report.post_condition_held() ? kHeld : kViolations;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"litmus-driven persistency validation against simulated memory subsystems"};
  app.require_subcommand(1);

  persival::FlowConfig cfg;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "execute the full validation flow for one test");
  run->add_option("--test", cfg.test_path, "litmus test file")->required();
  run->add_option("--profile", cfg.profile, "built-in profile name or profile file")
      ->capture_default_str();
  run->add_option("--mapping-seed", cfg.mapping_seed, "address-mapping seed")
      ->capture_default_str();
  run->add_option("--seed", cfg.seed, "run seed")->capture_default_str();
  run->add_option("--depth", cfg.depth, "capture depth")->capture_default_str();
  run->add_option("--preamble-base", cfg.preamble_base, "writes per ratio unit")
      ->capture_default_str();
  run->add_option("--memory-bits", cfg.memory_bits, "physical address bits of the machine")
      ->capture_default_str();
  run->add_option("--buckets", cfg.histogram_buckets, "histogram buckets")
      ->capture_default_str();
  run->add_option("--out", cfg.out_dir, "report directory (omit to skip files)");
  run->add_flag("--quiet", quiet, "suppress the textual report");

  std::string spec_path, campaign_out;
  auto* campaign = app.add_subcommand("campaign", "run a sweep described by a spec file");
  campaign->add_option("--spec", spec_path, "campaign spec file")->required();
  campaign->add_option("--out", campaign_out, "output directory")->required();

  std::string log_path, assignment_path, analyze_test;
  size_t analyze_buckets = 10;
  auto* analyze = app.add_subcommand("analyze", "offline metrics over a captured trace CSV");
  analyze->add_option("--log", log_path, "trace CSV (canonical format)")->required();
  analyze->add_option("--assignment", assignment_path, "assignment file from a run")->required();
  analyze->add_option("--test", analyze_test, "litmus test the trace came from")->required();
  analyze->add_option("--buckets", analyze_buckets, "histogram buckets")->capture_default_str();

  auto* profiles = app.add_subcommand("profiles", "list built-in machine profiles");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return finish_run(persival::run_flow(cfg), quiet);
    }
    if (campaign->parsed()) {
      std::ifstream in(spec_path, std::ios::binary);
      if (!in) throw persival::FlowError("cannot open '" + spec_path + "'");
      std::ostringstream buffer;
      buffer << in.rdbuf();
      persival::CampaignSpec spec = persival::parse_campaign(buffer.str());
      persival::CampaignResult result = persival::run_campaign(spec);
      persival::write_campaign_dir(result, campaign_out);
      std::fputs(persival::render_campaign_summary(result).c_str(), stdout);
      return kHeld;
    }
    if (analyze->parsed()) {
      persival::litmus::LitmusTest test;
      {
        std::ifstream in(analyze_test, std::ios::binary);
        if (!in) throw persival::FlowError("cannot open '" + analyze_test + "'");
        std::ostringstream buffer;
        buffer << in.rdbuf();
        test = persival::litmus::parse_litmus(buffer.str());
      }
      persival::RunReport report =
          persival::analyze_offline(log_path, assignment_path, test, analyze_buckets);
      std::fputs(persival::render_report_kv(report).c_str(), stdout);
      return report.post_condition_held() ? kHeld : kViolations;
    }
    if (profiles->parsed()) {
      for (const auto& [name, profile] : persival::sim::default_profiles()) {
        std::printf("%s\n", name.c_str());
        std::string body = persival::sim::render_profile(profile);
        std::istringstream lines(body);
        for (std::string line; std::getline(lines, line);)
          std::printf("  %s\n", line.c_str());
      }
      return kHeld;
    }
  } catch (const std::exception& error) {
    std::fprintf(stderr, "error: %s\n", error.what());
    return kInfraError;
  }
  return kInfraError;
}
