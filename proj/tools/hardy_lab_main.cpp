#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hardylab/campaign.hpp"
#include "hardylab/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hardy-lab: verification campaigns on discrete metric measure spaces"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  bool fail_fast = false;
  CLI::App* run = app.add_subcommand("run", "run a campaign config");
  run->add_option("config", config_path, "campaign config file")->required();
  run->add_flag("--fail-fast", fail_fast, "stop at the first failing stage");
  run->add_option("--out", out_dir, "output directory for the report bundle");

  std::string bundle_path;
  std::string format = "md";
  CLI::App* report = app.add_subcommand("report", "render a report bundle");
  report->add_option("bundle", bundle_path, "bundle directory or summary.json")->required();
  report->add_option("--format", format, "json, csv or md")
      ->check(CLI::IsMember({"json", "csv", "md"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      hardylab::Config cfg = hardylab::load_config(config_path);
      hardylab::CampaignResult res = hardylab::run_campaign(cfg, fail_fast);
      hardylab::write_bundle(res, out_dir);
      for (const auto& st : res.bundle["stages"])
        std::printf("[%s] %s %s\n", st["pass"].get<bool>() ? "pass" : "FAIL",
                    st["kind"].get<std::string>().c_str(),
                    st["name"].get<std::string>().c_str());
      std::printf("bundle written to %s\n", out_dir.c_str());
      return res.pass ? 0 : 1;
    }
    if (report->parsed()) {
      hardylab::ordered_json bundle = hardylab::load_bundle(bundle_path);
      std::cout << hardylab::render_report(bundle, format);
      return 0;
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  }
  return 0;
}
