// Times the generate phase with the serial reference path (one worker)
// against the OpenMP path, checks they produce identical program lists,
// and reports the speedup.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <string>

#include "seqsynth/oeis.hpp"
#include "seqsynth/parallel.hpp"
#include "seqsynth/selflearn.hpp"
#include "seqsynth/tnn.hpp"

using namespace seqsynth;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  std::string stripped;
  std::uint32_t targets = 16;
  std::uint64_t iterations = 2000;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    auto value = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << arg << '\n';
        std::exit(1);
      }
      return argv[++i];
    };
    if (arg == "--stripped") stripped = value();
    else if (arg == "--targets") targets = static_cast<std::uint32_t>(std::stoul(value()));
    else if (arg == "--iterations") iterations = std::stoull(value());
    else {
      std::cerr << "usage: seqsynth_bench --stripped FILE [--targets N] [--iterations N]\n";
      return 1;
    }
  }
  if (stripped.empty()) {
    std::cerr << "usage: seqsynth_bench --stripped FILE [--targets N] [--iterations N]\n";
    return 1;
  }

  oeis::Corpus corpus = oeis::Corpus::load_stripped(stripped, &std::cerr);
  if (corpus.size() == 0) {
    std::cerr << "empty corpus\n";
    return 1;
  }

  selflearn::GenConfig cfg;
  cfg.targets_per_gen = targets;
  cfg.search_iterations = iterations;
  cfg.seed = 7;

  tnn::Model model = tnn::Model::init(cfg.embed_dim, cfg.seed);
  rng::Engine target_rng(cfg.seed);
  std::vector<std::size_t> picks = selflearn::select_targets(corpus, targets, target_rng);

  cfg.searches_parallel = 1;
  auto t0 = std::chrono::steady_clock::now();
  auto serial = selflearn::generate_phase(model, corpus, picks, cfg, 0, nullptr);
  double serial_s = seconds_since(t0);

  cfg.searches_parallel = static_cast<std::uint32_t>(par::hardware_threads());
  auto t1 = std::chrono::steady_clock::now();
  auto parallel = selflearn::generate_phase(model, corpus, picks, cfg, 0, nullptr);
  double parallel_s = seconds_since(t1);

  bool same = serial.programs.size() == parallel.programs.size();
  for (std::size_t i = 0; same && i < serial.programs.size(); ++i)
    same = serial.programs[i] == parallel.programs[i];

  std::cout << "targets " << targets << ", iterations/search " << iterations << '\n';
  std::cout << "serial   (1 worker):  " << serial_s << " s, " << serial.generated << " programs\n";
  std::cout << "parallel (" << par::hardware_threads() << " workers): " << parallel_s << " s, "
            << parallel.generated << " programs\n";
  std::cout << "identical results: " << (same ? "yes" : "NO") << '\n';
  if (parallel_s > 0) std::cout << "speedup: " << serial_s / parallel_s << "x\n";
  return same ? 0 : 1;
}
