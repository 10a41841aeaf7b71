// Command-line front end: run experiments, print bound tables, self-test the hash.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "dsgd/harness.hpp"
#include "dsgd/streams.hpp"
#include "dsgd/version.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInternal = 1;
constexpr int kBadInput = 2;

struct HashVector {
  const char* key;
  std::uint32_t seed;
  std::uint32_t expected;
};

// Reference values of MurmurHash3 x86_32.
constexpr HashVector kHashVectors[] = {
    {"", 0, 0x00000000u},
    {"", 1, 0x514e28b7u},
    {"", 0xffffffffu, 0x81f16f39u},
    {"Hello, world!", 1234, 0xfaf6cdb3u},
    {"The quick brown fox jumps over the lazy dog", 0, 0x2e4ff723u},
    {"abc", 0, 0xb3dd93fau},
    {"aaaa", 0x9747b28cu, 0x5a97808au},
};

int hash_selftest() {
  int failures = 0;
  for (const auto& v : kHashVectors) {
    const auto got = dsgd::murmur3_32(v.key, v.seed);
    if (got != v.expected) {
      std::cerr << "murmur3_32(\"" << v.key << "\", " << v.seed << ") = " << std::hex << got << ", expected "
                << v.expected << std::dec << "\n";
      ++failures;
    }
  }
  std::cout << (failures == 0 ? "hash-selftest: ok\n" : "hash-selftest: FAILED\n");
  return failures == 0 ? kOk : kInternal;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const dsgd::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const dsgd::EngineAbort& e) {
    std::cerr << "engine aborted: " << e.what() << "\n";
    return kInternal;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delayed stochastic gradient descent experiments"};
  app.require_subcommand(1);

  std::string run_config;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run the configured delay sweep and write CSV outputs");
  run->add_option("--config", run_config, "Experiment config file")->required();
  run->add_flag("-q,--quiet", quiet, "No per-run progress lines");

  std::string bounds_config;
  auto* bounds = app.add_subcommand("bounds", "Print the regret bound formulas at the config's constants");
  bounds->add_option("--config", bounds_config, "Experiment config file")->required();

  auto* selftest = app.add_subcommand("hash-selftest", "Check the feature hash against reference vectors");
  auto* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  if (*run) {
    return guarded([&] {
      const auto cfg = dsgd::load_config(run_config);
      const auto outcome = dsgd::run_experiment(cfg, quiet ? nullptr : &std::cerr);
      std::cout << "wrote " << outcome.output_dir.string() << "\n";
      return kOk;
    });
  }
  if (*bounds) {
    return guarded([&] {
      std::cout << dsgd::bound_table(dsgd::load_config(bounds_config));
      return kOk;
    });
  }
  if (*selftest) return hash_selftest();
  if (*version) {
    std::cout << "dsgd " << dsgd::kVersion << "\n";
    return kOk;
  }
  return kBadInput;
}
