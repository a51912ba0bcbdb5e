#include "seqsynth/selflearn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "seqsynth/parallel.hpp"

namespace seqsynth::selflearn {

namespace {

// Stream tags for deriving independent rng streams from (seed, tag, ...).
constexpr std::uint64_t kTagTargets = 1;
constexpr std::uint64_t kTagSearch = 2;
constexpr std::uint64_t kTagTest = 3;
constexpr std::uint64_t kTagInit = 4;
constexpr std::uint64_t kTagTrain = 5;

}  // namespace

void GenConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (targets_per_gen == 0) bad("targets_per_gen must be positive");
  if (searches_parallel == 0) bad("searches_parallel must be positive");
  if (search_iterations == 0 && search_millis == 0)
    bad("one of search_iterations/search_millis must be positive");
  if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0)) bad("noise_fraction must be in [0,1]");
  if (embed_dim <= 0) bad("embed_dim must be positive");
  if (train_epochs < 0) bad("train_epochs must be non-negative");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    bad("learning_rate must be a finite non-negative number");
  if (budget_initial_steps == 0 || budget_steps_per_term == 0)
    bad("interpreter budget steps must be positive");
}

namespace {

std::string trim(std::string s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    std::uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
  }
}

double parse_f64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
}

// Atomic-enough persistence: write a sibling temp file, then rename over
// the target, so a crash never leaves a half-written file behind.
void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

GenConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  GenConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));

    if (key == "targets_per_gen") cfg.targets_per_gen = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "searches_parallel") cfg.searches_parallel = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "search_iterations") cfg.search_iterations = parse_u64(key, value);
    else if (key == "search_millis") cfg.search_millis = parse_u64(key, value);
    else if (key == "noise_fraction") cfg.noise_fraction = parse_f64(key, value);
    else if (key == "generations") cfg.generations = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "selection") {
      if (value == "smallest") cfg.selection = Selection::Smallest;
      else if (value == "random") cfg.selection = Selection::Random;
      else throw std::runtime_error(path + ":" + std::to_string(lineno) + ": selection must be smallest or random");
    } else if (key == "fresh_model") cfg.fresh_model = parse_bool(key, value);
    else if (key == "embed_dim") cfg.embed_dim = static_cast<int>(parse_u64(key, value));
    else if (key == "train_epochs") cfg.train_epochs = static_cast<int>(parse_u64(key, value));
    else if (key == "learning_rate") cfg.learning_rate = parse_f64(key, value);
    else if (key == "budget_initial_steps") cfg.budget_initial_steps = parse_u64(key, value);
    else if (key == "budget_steps_per_term") cfg.budget_steps_per_term = parse_u64(key, value);
    else throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  if (const char* env = std::getenv("SEQSYNTH_SEED")) cfg.seed = parse_u64("SEQSYNTH_SEED", env);
  cfg.validate();
  return cfg;
}

void save_db(const SolutionDb& db, const std::string& path) {
  std::ostringstream out;
  for (const auto& [anum, rec] : db)
    out << oeis::format_anum(anum) << ' ' << rec.size << ' ' << rec.generation_found << ' '
        << dsl::print(rec.program) << '\n';
  write_file_atomic(path, out.str());
}

SolutionDb load_db(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open solution db " + path);
  SolutionDb db;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string anum_text, program_text;
    std::uint32_t size = 0, gen = 0;
    if (!(fields >> anum_text >> size >> gen >> program_text))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad record");
    auto anum = oeis::parse_anum(anum_text);
    if (!anum) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad A-number");
    SolutionRecord rec;
    try {
      rec.program = dsl::parse(program_text);
    } catch (const dsl::ParseError& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    rec.size = rec.program.size();
    if (rec.size != size)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": size field disagrees with program");
    rec.generation_found = gen;
    rec.generation_improved = gen;  // not persisted; lower bound
    db[*anum] = std::move(rec);
  }
  return db;
}

void save_stats(const std::vector<GenStats>& stats, const std::string& path) {
  std::ostringstream out;
  out << "generation,new,cumulative,generated,tested\n";
  for (const GenStats& s : stats)
    out << s.generation << ',' << s.new_solutions << ',' << s.cumulative_solutions << ','
        << s.programs_generated << ',' << s.programs_tested << '\n';
  write_file_atomic(path, out.str());
}

std::vector<GenStats> load_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stats " + path);
  std::vector<GenStats> stats;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      continue;  // header
    }
    GenStats s;
    char comma;
    std::istringstream fields(line);
    if (!(fields >> s.generation >> comma >> s.new_solutions >> comma >> s.cumulative_solutions >>
          comma >> s.programs_generated >> comma >> s.programs_tested))
      throw std::runtime_error(path + ": bad stats row '" + line + "'");
    stats.push_back(s);
  }
  return stats;
}

std::vector<std::size_t> select_targets(const oeis::Corpus& corpus, std::size_t n,
                                        rng::Engine& rng) {
  if (corpus.size() == 0) throw std::invalid_argument("cannot select targets from an empty corpus");
  std::vector<std::size_t> targets(n);
  for (std::size_t& t : targets) t = rng.next_below(corpus.size());
  return targets;
}

namespace {

// Spreads the noised share evenly over the index range, so any prefix of
// searches carries roughly its proportional share.
bool noise_on(std::size_t i, double fraction) {
  auto upto = [&](std::size_t k) {
    return static_cast<std::uint64_t>(std::floor(static_cast<double>(k) * fraction));
  };
  return upto(i + 1) > upto(i);
}

}  // namespace

GenerateResult generate_phase(const tnn::Model& model, const oeis::Corpus& corpus,
                              const std::vector<std::size_t>& targets, const GenConfig& cfg,
                              std::uint32_t generation, std::ostream* log) {
  std::size_t n = targets.size();
  std::vector<std::vector<dsl::Program>> slots(n);
  std::vector<std::string> errors(n);

  int threads = static_cast<int>(std::min<std::size_t>(cfg.searches_parallel, n));
  par::for_index(n, threads, [&](std::size_t i) {
    try {
      tnn::SequenceKey key = tnn::SequenceKey::from_terms(corpus.terms_of(targets[i]));
      search::SearchLimits limits{cfg.search_iterations, cfg.search_millis};
      std::uint64_t seed = rng::derive(cfg.seed, kTagSearch, generation, i);
      search::SearchResult res =
          search::run_search(model, key, limits, noise_on(i, cfg.noise_fraction), seed);
      slots[i] = std::move(res.programs);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  GenerateResult out;
  std::unordered_set<dsl::Program, dsl::ProgramHash> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      if (log) *log << "search " << i << " of generation " << generation << " failed: " << errors[i] << '\n';
      continue;
    }
    for (dsl::Program& p : slots[i])
      if (seen.insert(p).second) out.programs.push_back(std::move(p));
  }
  out.generated = out.programs.size();
  return out;
}

TestResult test_phase(std::vector<dsl::Program> programs, const oeis::Corpus& /*corpus*/,
                      const oeis::SeqTrie& trie, SolutionDb& db, const GenConfig& cfg,
                      std::uint32_t generation,
                      const std::unordered_set<std::uint32_t>& target_anums,
                      rng::Engine& rng) {
  TestResult result;

  // Programs with a free y are not functions of the sequence index.
  std::erase_if(programs, [](const dsl::Program& p) { return p.free_y(); });
  // Smallest-first: under Occam selection the first cover of a sequence is
  // already its best of this generation.
  std::sort(programs.begin(), programs.end(), dsl::ProgramLess{});

  interp::Budget budget = cfg.budget();
  auto note_new = [&](std::uint32_t anum) {
    ++result.new_solutions;
    if (!target_anums.count(anum)) ++result.hindsight_new;
  };

  // Random selection collects this generation's covers per sequence first.
  std::map<std::uint32_t, std::vector<const dsl::Program*>> covers_by_anum;

  for (const dsl::Program& p : programs) {
    ++result.tested;
    interp::TermStream stream(p, budget);
    std::vector<std::uint32_t> matched = trie.match_stream(stream);
    for (std::uint32_t anum : matched) {
      if (cfg.selection == Selection::Random) {
        covers_by_anum[anum].push_back(&p);
        continue;
      }
      auto it = db.find(anum);
      if (it == db.end()) {
        db.emplace(anum, SolutionRecord{p, p.size(), generation, generation});
        note_new(anum);
      } else if (dsl::compare(p, it->second.program) < 0) {
        it->second.program = p;
        it->second.size = p.size();
        it->second.generation_improved = generation;
      }
    }
  }

  if (cfg.selection == Selection::Random) {
    for (const auto& [anum, candidates] : covers_by_anum) {
      const dsl::Program& choice = *candidates[rng.next_below(candidates.size())];
      auto it = db.find(anum);
      if (it == db.end()) {
        db.emplace(anum, SolutionRecord{choice, choice.size(), generation, generation});
        note_new(anum);
      } else {
        it->second.program = choice;
        it->second.size = choice.size();
        it->second.generation_improved = generation;
      }
    }
  }
  return result;
}

tnn::Model train_phase(const SolutionDb& db, const oeis::Corpus& corpus, const GenConfig& cfg,
                       std::uint32_t generation, const tnn::Model* previous) {
  if (db.empty()) throw std::invalid_argument("train_phase requires a non-empty solution database");

  std::vector<tnn::TrainPair> pairs;
  pairs.reserve(db.size());
  for (const auto& [anum, rec] : db) {
    auto idx = corpus.find_anum(anum);
    if (!idx)
      throw std::invalid_argument("solution " + oeis::format_anum(anum) + " is not in the corpus");
    pairs.push_back({tnn::SequenceKey::from_terms(corpus.terms_of(*idx)), rec.program});
  }

  tnn::Model model = (cfg.fresh_model || previous == nullptr)
                         ? tnn::Model::init(cfg.embed_dim, rng::derive(cfg.seed, kTagInit, generation + 1))
                         : *previous;
  rng::Engine eng(rng::derive(cfg.seed, kTagTrain, generation));
  tnn::train(model, pairs, cfg.train_epochs, cfg.learning_rate, eng);
  return model;
}

std::vector<GenStats> run(const GenConfig& cfg, const oeis::Corpus& corpus,
                          const std::string& out_dir, std::ostream* log) {
  cfg.validate();
  std::vector<GenStats> stats;
  if (cfg.generations == 0) return stats;

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::string db_path = out_dir + "/solutions.txt";
  std::string model_path = out_dir + "/model.ckpt";
  std::string stats_path = out_dir + "/stats.csv";
  std::string state_path = out_dir + "/state.txt";

  SolutionDb db;
  tnn::Model model;
  std::uint32_t next_gen = 0;

  if (fs::exists(state_path)) {
    std::ifstream in(state_path);
    std::string word;
    std::uint32_t last = 0;
    if (!(in >> word >> last) || word != "generation")
      throw std::runtime_error("corrupt state file " + state_path);
    next_gen = last + 1;
    db = load_db(db_path);
    stats = load_stats(stats_path);
    model = tnn::load_model(model_path);
    if (log) *log << "resuming after generation " << last << " with " << db.size() << " solutions\n";
    if (next_gen > cfg.generations) return stats;
  } else {
    model = tnn::Model::init(cfg.embed_dim, rng::derive(cfg.seed, kTagInit, 0));
  }

  oeis::SeqTrie trie(corpus);

  for (std::uint32_t g = next_gen; g <= cfg.generations; ++g) {
    rng::Engine target_rng(rng::derive(cfg.seed, kTagTargets, g));
    std::vector<std::size_t> targets = select_targets(corpus, cfg.targets_per_gen, target_rng);
    std::unordered_set<std::uint32_t> target_anums;
    for (std::size_t t : targets) target_anums.insert(corpus.sequence(t).anum);

    GenerateResult generated = generate_phase(model, corpus, targets, cfg, g, log);

    rng::Engine test_rng(rng::derive(cfg.seed, kTagTest, g));
    TestResult tested = test_phase(std::move(generated.programs), corpus, trie, db, cfg, g,
                                   target_anums, test_rng);

    GenStats s;
    s.generation = g;
    s.new_solutions = tested.new_solutions;
    s.cumulative_solutions = db.size();
    s.programs_generated = generated.generated;
    s.programs_tested = tested.tested;
    s.hindsight_new = tested.hindsight_new;
    stats.push_back(s);

    if (db.empty()) {
      if (log) *log << "generation " << g << ": no solutions yet, model left untrained\n";
    } else {
      model = train_phase(db, corpus, cfg, g, &model);
    }

    save_db(db, db_path);
    {
      std::string tmp = model_path + ".tmp";
      tnn::save_model(model, tmp);
      fs::rename(tmp, model_path);
    }
    save_stats(stats, stats_path);
    write_file_atomic(state_path, "generation " + std::to_string(g) + "\n");

    if (log)
      *log << "generation " << g << ": generated=" << s.programs_generated
           << " tested=" << s.programs_tested << " new=" << s.new_solutions
           << " cumulative=" << s.cumulative_solutions << " hindsight=" << s.hindsight_new << '\n';
  }
  return stats;
}

double key_uniqueness(const oeis::Corpus& corpus) {
  if (corpus.size() == 0) return 1.0;
  std::unordered_map<tnn::SequenceKey, std::uint32_t, tnn::SequenceKeyHash> counts;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    ++counts[tnn::SequenceKey::from_terms(corpus.terms_of(i))];
  std::size_t unique = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (counts[tnn::SequenceKey::from_terms(corpus.terms_of(i))] == 1) ++unique;
  return static_cast<double>(unique) / static_cast<double>(corpus.size());
}

}  // namespace seqsynth::selflearn
