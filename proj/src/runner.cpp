#include "tssr/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "tssr/chemcheck.hpp"
#include "tssr/error.hpp"
#include "tssr/metrics.hpp"
#include "tssr/parallel.hpp"

namespace tssr {
namespace {

namespace fs = std::filesystem;

const std::string& require(const std::string& value, const char* key) {
  if (value.empty()) throw ValidationError(std::string("config key '") + key + "' is required");
  return value;
}

fs::path or_default(const std::string& value, const RunConfig& cfg, const char* file) {
  return value.empty() ? fs::path(cfg.out_dir) / file : fs::path(value);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

// Every line, empty ones included (an empty sample is an invalid molecule).
std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void dump_config(const RunConfig& cfg, const char* command) {
  cfg.save(fs::path(cfg.out_dir) / (std::string("config_") + command + ".txt"));
}

Checkpoint load_checkpoint_for(const fs::path& path, const Vocabulary& vocab) {
  Checkpoint c = Checkpoint::load(path);
  if (c.vocab_hash != vocab.hash() || c.dims.vocab_size != static_cast<int>(vocab.size())) {
    throw ValidationError("checkpoint " + path.string() + " was built for a different vocabulary");
  }
  return c;
}

Actor<float> actor_from(const Checkpoint& c) {
  Actor<float> a = make_actor<float>(c.dims);
  restore_tensors(c.tensors, tensors(a));
  return a;
}

SwapRewarder make_rewarder(const RunConfig& cfg, const Vocabulary& vocab) {
  TokenPriors priors = TokenPriors::load(require(cfg.priors, "priors"), vocab);
  return SwapRewarder(vocab, std::move(priors), cfg.tssr);
}

}  // namespace

void run_vocab_build(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto corpus = read_corpus(require(cfg.corpus, "corpus"));
  const Vocabulary vocab = build_vocabulary(corpus);
  const TokenPriors priors = compute_priors(corpus, vocab);
  const fs::path vocab_path = or_default(cfg.vocab, cfg, "vocab.txt");
  const fs::path priors_path = or_default(cfg.priors, cfg, "priors.tsv");
  for (const auto& p : {vocab_path, priors_path}) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
  }
  vocab.save(vocab_path);
  priors.save(priors_path, vocab);
  dump_config(cfg, "vocab");
  log << "vocabulary: " << vocab.size() << " tokens from " << corpus.size() << " lines -> " << vocab_path.string() << "\n";
}

void run_pretrain(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Vocabulary vocab = Vocabulary::load(require(cfg.vocab, "vocab"));
  const auto lines = read_corpus(require(cfg.corpus, "corpus"));
  const EncodedCorpus corpus = encode_corpus(lines, vocab);
  if (corpus.skipped_too_long > 0) {
    log << "warning: skipped " << corpus.skipped_too_long << " sequences longer than " << kMaxSequenceLength - 2
        << " tokens\n";
  }
  const ModelDims dims = cfg.dims(vocab.size());
  const fs::path log_path = fs::path(cfg.out_dir) / "pretrain_log.tsv";
  std::ofstream step_log = open_out(log_path);
  step_log << "step\tloss\n";
  const PretrainResult result = pretrain(corpus.sequences, dims, cfg.pretrain_options(), [&](std::uint64_t step, double loss) {
    step_log << step << '\t' << real(loss) << '\n';
    if (step % 10 == 0) log << "pretrain step " << step << " loss " << loss << "\n";
  });
  close_out(step_log, log_path);

  Checkpoint ckpt;
  ckpt.vocab_hash = vocab.hash();
  ckpt.dims = dims;
  ckpt.parameter_count = parameter_count(result.actor);
  Actor<float>& actor = const_cast<Actor<float>&>(result.actor);
  store_tensors(ckpt.tensors, tensors(actor));
  std::vector<NamedTensor<float>> mv, vv;
  const auto names = tensors(actor);
  AdamState<float>& adam = const_cast<AdamState<float>&>(result.adam);
  for (std::size_t i = 0; i < names.size(); ++i) {
    mv.push_back({"adam.m." + names[i].name, &adam.m[i]});
    vv.push_back({"adam.v." + names[i].name, &adam.v[i]});
  }
  store_tensors(ckpt.optimizer, mv);
  store_tensors(ckpt.optimizer, vv);
  ckpt.counters = {{"adam.step", result.adam.step}, {"skipped_too_long", corpus.skipped_too_long}};
  ckpt.rng_seed = cfg.seed;
  const fs::path ckpt_path = or_default(cfg.checkpoint, cfg, "pretrain.ckpt");
  ckpt.save(ckpt_path);

  Report report;
  report.count("sequences", corpus.sequences.size());
  report.count("skipped_too_long", corpus.skipped_too_long);
  report.count("steps", result.log.size());
  report.fraction("final_batch_loss", result.log.back().second);
  // Loss of a uniform predictor: cross entropy log|V| minus beta times its entropy.
  report.fraction("uniform_loss", (1.0 - cfg.pretrain.beta) * std::log(static_cast<double>(vocab.size())));
  if (!cfg.heldout.empty()) {
    const EncodedCorpus held = encode_corpus(read_corpus(cfg.heldout), vocab);
    const double loss = heldout_loss(result.actor, held.sequences, cfg.pretrain.beta);
    const double ce = heldout_loss(result.actor, held.sequences, 0.0);
    report.fraction("heldout_loss", loss);
    report.fraction("heldout_cross_entropy", ce);
    report.fraction("log_vocab", std::log(static_cast<double>(vocab.size())));
    log << "held-out loss " << loss << " (cross entropy " << ce << ")\n";
  }
  const fs::path report_path = or_default(cfg.report, cfg, "pretrain_report.txt");
  std::ofstream out = open_out(report_path);
  out << report.str();
  close_out(out, report_path);
  dump_config(cfg, "pretrain");
  log << "pretrained checkpoint -> " << ckpt_path.string() << "\n";
}

void run_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const TrainMode mode = cfg.train_mode();
  const Vocabulary vocab = Vocabulary::load(require(cfg.vocab, "vocab"));
  const SwapRewarder rewarder = make_rewarder(cfg, vocab);
  std::optional<Checkpoint> init;
  if (mode == TrainMode::Pretrained) {
    init = load_checkpoint_for(require(cfg.init_checkpoint, "init_checkpoint"), vocab);
  } else if (!cfg.init_checkpoint.empty()) {
    throw ValidationError("mode prl trains from scratch; unset init_checkpoint");
  }
  TrainOptions opt;
  opt.mode = mode;
  opt.ppo = cfg.ppo;
  opt.dims = cfg.dims(vocab.size());
  opt.seed = cfg.seed;

  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  std::ofstream episodes = open_out(out_dir / "episodes.tsv");
  std::ofstream epochs = open_out(out_dir / "epochs.tsv");
  episodes << "episode\tlength\tterminal_R\tdiscounted_return\n";
  epochs << "epoch\tepisodes\tmean_discounted_return\n";
  const auto start = std::chrono::steady_clock::now();
  TrainCallbacks cb;
  cb.on_episode = [&](const EpisodeRecord& r) {
    episodes << r.episode << '\t' << r.length << '\t' << real(r.terminal_reward) << '\t' << real(r.discounted_return) << '\n';
  };
  cb.on_epoch = [&](int epoch, double mean, std::size_t n) {
    epochs << epoch << '\t' << n << '\t' << real(mean) << '\n';
    if (epoch % 10 == 0 || epoch == opt.ppo.epochs) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log << "epoch " << epoch << " episodes " << n << " mean return " << mean << " (" << secs << " s)\n";
    }
  };
  const TrainResult result = train(rewarder, opt, init ? &*init : nullptr, cb);
  close_out(episodes, out_dir / "episodes.tsv");
  close_out(epochs, out_dir / "epochs.tsv");

  to_checkpoint(result.initial, vocab.hash(), cfg.seed).save(out_dir / "checkpoint_init.ckpt");
  to_checkpoint(result.best, vocab.hash(), cfg.seed).save(out_dir / "checkpoint_best.ckpt");
  to_checkpoint(result.final, vocab.hash(), cfg.seed).save(out_dir / "checkpoint_final.ckpt");

  Report report;
  report.text("mode", cfg.mode);
  report.count("epochs", static_cast<std::size_t>(opt.ppo.epochs));
  report.count("episodes", result.episodes.size());
  report.fraction("learning_rate", opt.ppo.learning_rate(mode));
  report.text("peak_reward", result.episodes.empty() ? "nan" : real(result.peak_return));
  report.count("best_epoch", static_cast<std::size_t>(result.best_epoch));
  report.text("best_score", real(result.best_score));
  report.text("best_by", cfg.get("best_by"));
  const fs::path report_path = or_default(cfg.report, cfg, "train_report.txt");
  std::ofstream out = open_out(report_path);
  out << report.str();
  close_out(out, report_path);
  dump_config(cfg, "train");
  log << "training done: " << result.episodes.size() << " episodes, best epoch " << result.best_epoch << "\n";
}

void run_sample(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Vocabulary vocab = Vocabulary::load(require(cfg.vocab, "vocab"));
  const Checkpoint ckpt = load_checkpoint_for(require(cfg.checkpoint, "checkpoint"), vocab);
  const Actor<float> actor = actor_from(ckpt);
  const auto n = static_cast<std::size_t>(cfg.n_samples);
  std::vector<Rng> rngs;
  rngs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rngs.emplace_back(derive_seed(cfg.seed, i));
  constexpr std::size_t kGroup = 128;
  const std::size_t groups = (n + kGroup - 1) / kGroup;
  std::vector<std::string> lines(n);
  parallel_for(groups, cfg.threads, [&](std::size_t g) {
    const std::size_t begin = g * kGroup;
    const std::size_t end = std::min(n, begin + kGroup);
    const auto seqs = sample_batch(actor, std::span<Rng>(rngs.data() + begin, end - begin), cfg.ppo.t_max);
    for (std::size_t i = 0; i < seqs.size(); ++i) lines[begin + i] = vocab.detokenize(seqs[i].tokens);
  });
  const fs::path path = require(cfg.samples, "samples");
  std::ofstream out = open_out(path);
  for (const auto& l : lines) out << l << '\n';
  close_out(out, path);
  dump_config(cfg, "sample");
  log << "wrote " << n << " samples -> " << path.string() << "\n";
}

void run_repair(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Vocabulary vocab = Vocabulary::load(require(cfg.vocab, "vocab"));
  const SwapRewarder rewarder = make_rewarder(cfg, vocab);
  const auto lines = read_lines(require(cfg.input, "input"));
  std::vector<std::string> rows(lines.size());
  parallel_for(lines.size(), cfg.threads, [&](std::size_t i) {
    std::vector<TokenId> ids;
    try {
      ids = vocab.tokenize(lines[i]);
    } catch (const TokenizeError&) {
      rows[i] = lines[i] + "\t\tUnrepairable\t-1";
      return;
    }
    Rng rng(derive_seed(cfg.seed, i));
    const RewardBreakdown b = rewarder.reward(ids, rng);
    const std::string repaired = b.repaired_sequence ? vocab.detokenize(*b.repaired_sequence) : std::string();
    rows[i] = lines[i] + '\t' + repaired + '\t' + std::string(to_string(b.path)) + '\t' + real(b.reward);
  });
  const fs::path path = require(cfg.output, "output");
  std::ofstream out = open_out(path);
  for (const auto& r : rows) out << r << '\n';
  close_out(out, path);
  dump_config(cfg, "repair");
  log << "repaired " << lines.size() << " lines -> " << path.string() << "\n";
}

void run_eval(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto samples = read_lines(require(cfg.samples, "samples"));
  std::vector<std::string> training;
  if (!cfg.corpus.empty()) training = read_corpus(cfg.corpus);
  const auto train_set = canonical_set(training, cfg.threads);
  const GenerationMetrics m = evaluate(samples, train_set, cfg.threads);

  Report report;
  report.count("n_gen", m.n_gen);
  report.count("n_syntactic_valid", m.n_syntactic_valid);
  report.count("n_chem_valid", m.n_chem_valid);
  report.count("n_novel", m.n_novel);
  report.count("n_novel_syntactic", m.n_novel_syntactic);
  report.count("n_unique", m.n_unique);
  report.count("n_unique_syntactic", m.n_unique_syntactic);
  report.fraction("validity", m.validity);
  report.fraction("chem_validity", m.chem_validity);
  report.fraction("novelty", m.novelty);
  report.fraction("novelty_syntactic", m.novelty_syntactic);
  report.fraction("uniqueness", m.uniqueness);
  report.fraction("uniqueness_syntactic", m.uniqueness_syntactic);
  report.count("novelty_undefined", m.novelty_undefined ? 1 : 0);
  report.fraction("mean_length", m.mean_length);

  std::vector<MolGraph> valid;
  for (const auto& s : m.valid_canonical) valid.push_back(std::get<MolGraph>(parse_smiles(s)));
  if (valid.size() >= 2) {
    std::vector<Fingerprint> fps(valid.size());
    parallel_for(valid.size(), cfg.threads, [&](std::size_t i) { fps[i] = fingerprint(valid[i]); });
    report.fraction("nn_diversity", nn_diversity(fps, cfg.threads));
    report.count("nn_diversity_undefined", 0);
  } else {
    report.fraction("nn_diversity", 0.0);
    report.count("nn_diversity_undefined", 1);
  }
  std::vector<MolGraph> reference;
  for (const auto& s : training) {
    ParseResult r = parse_smiles(s);
    if (parsed(r)) reference.push_back(std::move(std::get<MolGraph>(r)));
  }
  const ScaffoldStats sc = scaffold_stats(valid, reference, cfg.threads);
  report.count("scaffold_count", sc.scaffold_count);
  report.fraction("scaffold_similarity", sc.scaffold_similarity);
  report.count("scaffold_reference_empty", sc.reference_empty ? 1 : 0);

  if (!cfg.vocab.empty() && !cfg.priors.empty()) {
    const Vocabulary vocab = Vocabulary::load(cfg.vocab);
    const SwapRewarder rewarder = make_rewarder(cfg, vocab);
    std::vector<std::optional<RewardBreakdown>> scored(samples.size());
    parallel_for(samples.size(), cfg.threads, [&](std::size_t i) {
      std::vector<TokenId> ids;
      try {
        ids = vocab.tokenize(samples[i]);
      } catch (const TokenizeError&) {
        return;
      }
      Rng rng(derive_seed(cfg.seed, i));
      scored[i] = rewarder.reward(ids, rng);
    });
    std::vector<RewardBreakdown> breakdowns;
    for (auto& s : scored) {
      if (s) breakdowns.push_back(std::move(*s));
    }
    report.count("repair_scored", breakdowns.size());
    if (!breakdowns.empty()) {
      const RepairStats rs = repair_stats(breakdowns);
      report.fraction("swap_count", rs.swap_count);
      report.fraction("fix_rate", rs.fix_rate);
      report.fraction("chem_err_mean", rs.chem_err_mean);
      double mean_r = 0.0;
      for (const auto& b : breakdowns) mean_r += b.reward;
      report.fraction("mean_reward", mean_r / static_cast<double>(breakdowns.size()));
    }
  }
  const fs::path path = or_default(cfg.report, cfg, "eval_report.txt");
  std::ofstream out = open_out(path);
  out << report.str();
  close_out(out, path);
  dump_config(cfg, "eval");
  log << "validity " << m.validity << " chem validity " << m.chem_validity << " -> " << path.string() << "\n";
}

void run_oracle_export(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::string& input = cfg.input.empty() ? require(cfg.samples, "input") : cfg.input;
  const auto lines = read_lines(input);
  std::vector<std::string> rows(lines.size());
  parallel_for(lines.size(), cfg.threads, [&](std::size_t i) {
    const ParseResult r = parse_smiles(lines[i]);
    std::string problems;
    if (parsed(r)) problems = std::to_string(count_problems(std::get<MolGraph>(r)));
    rows[i] = std::to_string(i) + '\t' + lines[i] + '\t' + (parsed(r) ? "1" : "0") + '\t' + problems;
  });
  const fs::path path = require(cfg.output, "output");
  std::ofstream out = open_out(path);
  out << "idx\tsmiles\tparse_ok\tchem_problems\n";
  for (const auto& r : rows) out << r << '\n';
  close_out(out, path);
  log << "exported " << lines.size() << " judgments -> " << path.string() << "\n";
}

}  // namespace tssr
