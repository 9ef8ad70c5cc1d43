#include <CLI11.hpp>

#include <iostream>

#include "sqz/commands.hpp"
#include "sqz/common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Squeezed-light simulation, tomography and noise analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sqz::cli::kToolVersion);

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir = "out";
  std::size_t threads = 1;
  std::string format;
  std::vector<std::string> assignments;

  app.add_option("--config", config_path, "Sectioned key = value config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides [output] seed)");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--format", format, "Dataset encoding")->check(CLI::IsMember({"binary", "text"}));
  app.add_option("--set", assignments, "Override a config value: section.key=value");

  std::vector<std::string> inputs;
  for (const auto& name : sqz::cli::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("inputs", inputs, "Input files or dataset prefixes");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  seed_given = seed_opt->count() > 0;

  try {
    sqz::cli::RunOptions opts;
    if (!config_path.empty()) opts.config = sqz::PipelineConfig::from_file(config_path);
    for (const auto& a : assignments) opts.config.set_assignment(a);
    if (seed_given) opts.config.set("output", "seed", std::to_string(seed));
    if (!format.empty()) opts.config.set("output", "format", format);
    opts.out_dir = out_dir;
    opts.inputs = inputs;
    sqz::set_thread_count(threads);

    const std::string command = app.get_subcommands().front()->get_name();
    const auto result = sqz::cli::run_command(command, opts);
    std::cout << command << ": wrote " << result.outputs.size() << " files to " << out_dir << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "sqz: " << e.what() << '\n';
    return sqz::cli::exit_code_for(e);
  }
}
