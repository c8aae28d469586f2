#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cortexkit/datasets.hpp"
#include "cortexkit/experiments.hpp"
#include "cortexkit/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cortexkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

std::string flag_name(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + s + "'");
}

// Converts a flag's text to the JSON type of its default.
json typed_value(const std::string& key, const json& def, const std::string& text) {
  try {
    std::size_t used = 0;
    if (def.is_boolean()) return parse_bool(text);
    if (def.is_number_unsigned()) {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
      const auto v = std::stoull(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing characters");
      return v;
    }
    if (def.is_number_integer()) {
      const auto v = std::stoll(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing characters");
      return v;
    }
    if (def.is_number_float()) {
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing characters");
      return v;
    }
    if (def.is_array()) {
      json arr = json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) arr.push_back(std::stoll(item));
      return arr;
    }
    return text;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad value '" + text + "' for " + flag_name(key));
  }
}

struct CommonFlags {
  std::uint64_t seed = 1;
  std::string out;
  std::string config;
};

struct CommandSlot {
  const ExperimentDef* def = nullptr;
  CLI::App* app = nullptr;
  CommonFlags common;
  std::map<std::string, std::string> raw;
  std::map<std::string, CLI::Option*> opts;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

int run_command(CommandSlot& slot) {
  // defaults < config file < flags
  json overrides = json::object();
  std::uint64_t seed = slot.common.seed;
  std::string out = "runs/" + slot.def->name;
  if (!slot.common.config.empty()) {
    json cfg;
    try {
      cfg = json::parse(read_text(slot.common.config));
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("config " + slot.common.config + ": " + e.what());
    }
    if (!cfg.is_object()) throw std::invalid_argument("config file must hold a JSON object");
    for (const auto& [key, value] : cfg.items()) {
      if (key == "seed") {
        seed = value.get<std::uint64_t>();
      } else if (key == "out") {
        out = value.get<std::string>();
      } else {
        overrides[key] = value;
      }
    }
  }
  if (slot.seed_opt->count()) seed = slot.common.seed;
  if (slot.out_opt->count()) out = slot.common.out;
  for (const auto& [key, opt] : slot.opts) {
    if (opt->count()) overrides[key] = typed_value(key, slot.def->defaults.at(key), slot.raw[key]);
  }

  bool passed = true;
  const RunManifest m = run_experiment(slot.def->name, overrides, seed, out, std::cout, &passed);
  std::cout << "wrote " << m.outputs.size() + m.timing_outputs.size() << " files and " << kManifestName
            << " to " << out << "\n";
  return passed ? kExitOk : kExitValidation;
}

int run_replay(const std::string& manifest, const std::string& out_arg) {
  const fs::path out = out_arg.empty() ? fs::path(manifest).parent_path() / "replay" : fs::path(out_arg);
  const ReplayReport rep = replay_manifest(manifest, out, std::cout);
  for (const auto& f : rep.identical) std::cout << "IDENTICAL " << f << "\n";
  for (const auto& f : rep.differing) std::cout << "DIFFERENT " << f << "\n";
  for (const auto& f : rep.skipped) std::cout << "SKIPPED   " << f << "\n";
  if (!rep.original.deterministic) std::cout << "note: " << rep.original.note << "\n";
  std::cout << (rep.ok() ? "replay reproduced all deterministic outputs" : "replay differs") << "\n";
  return rep.ok() ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cortexkit: layer-wise local learning and engram memory experiments"};
  app.require_subcommand(1);

  std::vector<std::unique_ptr<CommandSlot>> slots;
  for (const auto& def : experiments()) {
    auto slot = std::make_unique<CommandSlot>();
    slot->def = &def;
    slot->app = app.add_subcommand(def.name, def.description);
    slot->seed_opt = slot->app->add_option("--seed", slot->common.seed, "seed for all randomness");
    slot->out_opt = slot->app->add_option("--out", slot->common.out, "output directory (default runs/<command>)");
    slot->app->add_option("--config", slot->common.config, "JSON file of settings; flags take precedence");
    for (const auto& [key, value] : def.defaults.items()) {
      const std::string shown = value.is_string() ? value.get<std::string>() : value.dump();
      slot->opts[key] = slot->app->add_option(flag_name(key), slot->raw[key], "default: " + shown);
    }
    slots.push_back(std::move(slot));
  }

  std::string manifest, replay_out;
  CLI::App* replay = app.add_subcommand("replay", "re-run a manifest and compare outputs byte for byte");
  replay->add_option("manifest", manifest, "manifest.json of a previous run")->required();
  replay->add_option("--out", replay_out, "output directory (default <run>/replay)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (replay->parsed()) return run_replay(manifest, replay_out);
    for (auto& slot : slots) {
      if (slot->app->parsed()) return run_command(*slot);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
