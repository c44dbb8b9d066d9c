#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "blurforge/analysis.hpp"
#include "blurforge/attack.hpp"
#include "blurforge/corpus.hpp"
#include "blurforge/error.hpp"
#include "blurforge/image_io.hpp"
#include "blurforge/model.hpp"
#include "blurforge/physical.hpp"
#include "blurforge/rng.hpp"
#include "blurforge/saliency.hpp"

namespace blurforge::cli {
namespace fs = std::filesystem;

int worker_count() {
  const char* env = std::getenv("BLURFORGE_THREADS");
  if (env != nullptr) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace {

struct ConfigFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

int exit_code(Errc c) {
  switch (c) {
    case Errc::IoError:
    case Errc::MissingFile:
    case Errc::NotGrayscale:
    case Errc::DimensionMismatch: return kExitIo;
    default: return kExitConfig;
  }
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
}

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {}
  void line(const std::string& s) {
    std::lock_guard lock(mu_);
    err_ << s << '\n';
  }

 private:
  std::ostream& err_;
  std::mutex mu_;
};

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  return out;
}

void summary(std::ostream& out, double rate, std::size_t n, std::size_t skipped) {
  out << "success_rate=" << fmt(rate) << " n=" << n << " skipped=" << skipped << '\n';
}

Corpus require_corpus(const fs::path& root) {
  Corpus corpus = load_corpus(root);
  if (corpus.entries.empty()) throw ConfigFailure("empty corpus");
  return corpus;
}

void require_labels(const Corpus& corpus, const Classifier& model) {
  for (const CorpusEntry& e : corpus.entries) {
    if (e.label >= model.num_classes()) {
      throw ConfigFailure("label " + std::to_string(e.label) + " of " + e.id + " exceeds the model's classes");
    }
  }
}

// ---------------------------------------------------------------------------
// Shared attack flags

struct AttackFlags {
  std::string model;
  std::string corpus;
  std::string out;
  std::string variant = "full";
  double eps = 15.0;
  double eps_theta = 0.4;
  int n_steps = 51;
  int iters = 10;
  double step_kernel = 0.04;
  double step_theta_px = 1.5;
  double mu = 1.0;
  std::uint64_t seed = 0;
  std::string kernel_step = "weights";
  std::string baseline;
  std::string region = "whole";
  double eps_a = 8.0 / 255.0;
  double blur_size = 15.0;
  bool strict = false;

  AttackConfig config() const {
    AttackConfig cfg;
    const auto v = parse_variant(variant);
    if (!v) throw ConfigFailure("unknown variant '" + variant + "'");
    cfg.variant = *v;
    cfg.eps = eps;
    cfg.eps_theta = eps_theta;
    cfg.n_steps = n_steps;
    cfg.iterations = iters;
    cfg.step_kernel = step_kernel;
    cfg.step_theta_px = step_theta_px;
    cfg.mu = mu;
    cfg.seed = seed;
    if (kernel_step == "logits") {
      cfg.kernel_step = KernelStep::Logits;
    } else if (kernel_step != "weights") {
      throw ConfigFailure("unknown kernel step '" + kernel_step + "'");
    }
    cfg.validate();
    return cfg;
  }
};

void add_io_flags(CLI::App* cmd, AttackFlags& f) {
  cmd->add_option("--model", f.model, "TinyCnn checkpoint")->required();
  cmd->add_option("--corpus", f.corpus, "corpus directory with labels.csv")->required();
  cmd->add_option("--out", f.out, "output directory")->required();
  cmd->add_flag("--strict", f.strict, "exit 2 when any entry is skipped");
}

void add_attack_flags(CLI::App* cmd, AttackFlags& f) {
  cmd->add_option("--variant", f.variant, "pixel | obj | bg | image | full")->capture_default_str();
  cmd->add_option("--eps", f.eps, "kernel support bound")->capture_default_str();
  cmd->add_option("--eps-theta", f.eps_theta, "translation bound")->capture_default_str();
  cmd->add_option("--n-steps", f.n_steps, "sub-motion count N")->capture_default_str();
  cmd->add_option("--iters", f.iters, "iterations")->capture_default_str();
  cmd->add_option("--step-kernel", f.step_kernel, "kernel step size")->capture_default_str();
  cmd->add_option("--step-theta-px", f.step_theta_px, "translation step in pixels")->capture_default_str();
  cmd->add_option("--mu", f.mu, "momentum decay")->capture_default_str();
  cmd->add_option("--seed", f.seed, "seed")->capture_default_str();
  cmd->add_option("--kernel-step", f.kernel_step, "weights | logits")->capture_default_str();
}

struct Entry {
  Image image;
  SaliencyMask mask;
};

Entry load_entry(const CorpusEntry& e, const Classifier& model) {
  Entry out;
  out.image = read_image(e.image);
  require_input(model, out.image, e.id.c_str());
  out.mask = e.mask ? load_mask(*e.mask, out.image.height, out.image.width) : spectral_residual(out.image);
  return out;
}

struct Outcome {
  bool ok = false;
  bool success = false;
  std::string row;
};

struct BatchStats {
  std::size_t n = 0;
  std::size_t skipped = 0;
  std::size_t successes = 0;
  double rate() const { return n == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(n); }
};

BatchStats tally(const std::vector<Outcome>& outcomes) {
  BatchStats s;
  for (const Outcome& o : outcomes) {
    if (!o.ok) {
      ++s.skipped;
      continue;
    }
    ++s.n;
    s.successes += o.success;
  }
  return s;
}

/// Runs `fn` on every corpus entry on the worker pool; a failing entry is
/// logged and skipped.
template <typename Fn>
std::vector<Outcome> run_batch(const Corpus& corpus, const Classifier& model, Log& log, const char* what, Fn&& fn) {
  std::vector<Outcome> outcomes(corpus.entries.size());
  parallel_for(corpus.entries.size(), [&](std::size_t i) {
    const CorpusEntry& e = corpus.entries[i];
    try {
      const Entry entry = load_entry(e, model);
      outcomes[i] = fn(e, entry);
      outcomes[i].ok = true;
      log.line(std::string(what) + " " + e.id + (outcomes[i].success ? ": fooled" : ": held"));
    } catch (const Error& err) {
      log.line(std::string(what) + " " + e.id + ": skipped (" + err.what() + ")");
    }
  });
  return outcomes;
}

int finish(const BatchStats& s, bool strict, std::ostream& out) {
  summary(out, s.rate(), s.n, s.skipped);
  return strict && s.skipped > 0 ? kExitIo : kExitOk;
}

void write_adv_set(const fs::path& dir, const Corpus& corpus, const std::vector<Outcome>& outcomes) {
  std::ofstream labels = open_csv(dir / "labels.csv");
  labels << "filename,label\n";
  for (std::size_t i = 0; i < outcomes.size(); ++i)
    if (outcomes[i].ok) labels << corpus.entries[i].id << ".rawf," << corpus.entries[i].label << '\n';
}

void save_adv(const fs::path& dir, const std::string& id, const Image& adv) {
  write_png(dir / (id + ".png"), adv);
  write_rawf(dir / (id + ".rawf"), adv);
}

// ---------------------------------------------------------------------------
// attack

BlurRegion parse_region(const std::string& name) {
  if (name == "whole") return BlurRegion::Whole;
  if (name == "obj") return BlurRegion::Obj;
  if (name == "bg") return BlurRegion::Bg;
  throw ConfigFailure("unknown region '" + name + "'");
}

Image run_baseline(const AttackFlags& f, const Classifier& model, const Entry& entry, int label, int& iters) {
  const BlurRegion region = parse_region(f.region);
  iters = 1;
  if (f.baseline == "fgsm") return fgsm(model, entry.image, label, f.eps_a);
  if (f.baseline == "mifgsm") {
    iters = f.iters;
    return mifgsm(model, entry.image, label, f.eps_a, f.iters, f.mu);
  }
  if (f.baseline == "gauss") return blur_baseline(entry.image, entry.mask, BlurKind::Gauss, f.blur_size, region);
  if (f.baseline == "defocus") return blur_baseline(entry.image, entry.mask, BlurKind::Defocus, f.blur_size, region);
  throw ConfigFailure("unknown baseline '" + f.baseline + "'");
}

int cmd_attack(const AttackFlags& f, std::ostream& out, Log& log) {
  const AttackConfig base = f.config();
  if (!f.baseline.empty() && f.baseline != "fgsm" && f.baseline != "mifgsm" && f.baseline != "gauss" &&
      f.baseline != "defocus") {
    throw ConfigFailure("unknown baseline '" + f.baseline + "'");
  }
  parse_region(f.region);
  const Corpus corpus = require_corpus(f.corpus);
  const TinyCnn model = TinyCnn::load(f.model);
  require_labels(corpus, model);

  const fs::path root(f.out);
  const fs::path adv_dir = root / "adv";
  fs::create_directories(adv_dir);

  const std::vector<Outcome> outcomes = run_batch(corpus, model, log, "attack", [&](const CorpusEntry& e, const Entry& entry) {
    Outcome o;
    const int clean = predict(model, entry.image).label;
    Image adv;
    int iters = 0;
    Translation to;
    Translation tb;
    if (f.baseline.empty()) {
      AttackConfig cfg = base;
      cfg.seed = Rng::derive_seed(f.seed, e.id);
      AttackResult r = abba_attack(model, entry.image, e.label, entry.mask, cfg);
      adv = std::move(r.adversarial);
      iters = r.report.iterations_used;
      to = r.report.theta_o;
      tb = r.report.theta_b;
    } else {
      adv = run_baseline(f, model, entry, e.label, iters);
    }
    const LossGrad lg = input_grad(model, adv, e.label);
    const int pred = argmax(lg.logits);
    o.success = pred != e.label;
    o.row = e.id + ',' + std::to_string(clean) + ',' + std::to_string(pred) + ',' + (o.success ? "1" : "0") + ',' +
            std::to_string(iters) + ',' + fmt(lg.loss) + ',' + fmt(to.tx) + ',' + fmt(to.ty) + ',' + fmt(tb.tx) +
            ',' + fmt(tb.ty);
    save_adv(adv_dir, e.id, adv);
    return o;
  });

  std::ofstream csv = open_csv(root / "report.csv");
  csv << "id,clean_pred,adv_pred,success,iters,loss_final,theta_ox,theta_oy,theta_bx,theta_by\n";
  for (const Outcome& o : outcomes)
    if (o.ok) csv << o.row << '\n';
  write_adv_set(adv_dir, corpus, outcomes);
  return finish(tally(outcomes), f.strict, out);
}

// ---------------------------------------------------------------------------
// sweep

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigFailure("bad value list '" + text + "'");
    }
  }
  if (values.empty()) throw ConfigFailure("empty value list");
  return values;
}

std::vector<double> default_grid(const std::string& param) {
  std::vector<double> v;
  if (param == "eps") {
    for (int e = 5; e <= 50; e += 5) v.push_back(e);
  } else if (param == "eps-theta") {
    for (int t = 0; t <= 10; ++t) v.push_back(t / 10.0);
  } else {
    for (int d = 10; d <= 170; d += 20) v.push_back(d);
  }
  return v;
}

int cmd_sweep(const AttackFlags& f, const std::string& param, const std::string& values_text,
              const std::string& bg_text, std::ostream& out, Log& log) {
  if (param != "eps" && param != "eps-theta" && param != "direction") {
    throw ConfigFailure("unknown sweep parameter '" + param + "'");
  }
  const std::vector<double> values = values_text.empty() ? default_grid(param) : parse_list(values_text);
  const std::vector<double> bg_dirs = bg_text.empty() ? default_grid("direction") : parse_list(bg_text);
  const AttackConfig base = f.config();
  const Corpus corpus = require_corpus(f.corpus);
  const TinyCnn model = TinyCnn::load(f.model);
  require_labels(corpus, model);

  const fs::path root(f.out);
  fs::create_directories(root);
  std::ofstream csv = open_csv(root / "sweep.csv");
  csv << "param,value,succ_rate\n";

  BatchStats last;
  for (double value : values) {
    std::vector<AttackConfig> cells;
    AttackConfig cfg = base;
    if (param == "eps") {
      cfg.eps = value;
      cells.push_back(cfg);
    } else if (param == "eps-theta") {
      cfg.eps_theta = value;
      cells.push_back(cfg);
    } else {
      for (double bg : bg_dirs) {
        cfg.fixed_theta_o = direction_translation(value, cfg.eps_theta);
        cfg.fixed_theta_b = direction_translation(bg, cfg.eps_theta);
        cells.push_back(cfg);
      }
    }
    for (AttackConfig& c : cells) c.validate();

    double rate_sum = 0.0;
    for (const AttackConfig& c : cells) {
      const std::vector<Outcome> outcomes =
          run_batch(corpus, model, log, "sweep", [&](const CorpusEntry& e, const Entry& entry) {
            AttackConfig cell = c;
            cell.seed = Rng::derive_seed(f.seed, e.id);
            Outcome o;
            o.success = abba_attack(model, entry.image, e.label, entry.mask, cell).report.success;
            return o;
          });
      last = tally(outcomes);
      rate_sum += last.rate();
    }
    csv << param << ',' << fmt(value) << ',' << fmt(rate_sum / static_cast<double>(cells.size())) << '\n';
  }
  return finish(last, f.strict, out);
}

// ---------------------------------------------------------------------------
// physical

int cmd_physical(const AttackFlags& f, double depth, const CameraIntrinsics& k, std::ostream& out, Log& log) {
  if (!(depth > 0.0)) throw ConfigFailure("depth must be positive");
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw ConfigFailure("focal lengths must be positive");
  const AttackConfig base = f.config();
  const Corpus corpus = require_corpus(f.corpus);
  const TinyCnn model = TinyCnn::load(f.model);
  require_labels(corpus, model);

  const fs::path root(f.out);
  const fs::path adv_dir = root / "adv";
  fs::create_directories(adv_dir);

  const std::vector<Outcome> outcomes =
      run_batch(corpus, model, log, "physical", [&](const CorpusEntry& e, const Entry& entry) {
        AttackConfig cfg = base;
        cfg.seed = Rng::derive_seed(f.seed, e.id);
        const PhysicalResult r = physical_attack(model, entry.image, e.label, cfg);
        const CameraMotion cam = camera_translation(r.theta, entry.image.height, entry.image.width, depth, k);
        Outcome o;
        o.success = r.report.success;
        o.row = e.id + ',' + std::to_string(r.report.clean_prediction) + ',' +
                std::to_string(r.report.final_prediction) + ',' + (o.success ? "1" : "0") + ',' +
                std::to_string(r.report.iterations_used) + ',' + fmt(r.report.final_loss) + ',' + fmt(r.theta.tx) +
                ',' + fmt(r.theta.ty) + ',' + fmt(cam.x_m) + ',' + fmt(cam.y_m);
        save_adv(adv_dir, e.id, r.adversarial);
        return o;
      });

  std::ofstream csv = open_csv(root / "physical.csv");
  csv << "id,clean_pred,adv_pred,success,iters,loss_final,theta_x,theta_y,camera_x_m,camera_y_m\n";
  for (const Outcome& o : outcomes)
    if (o.ok) csv << o.row << '\n';
  write_adv_set(adv_dir, corpus, outcomes);
  return finish(tally(outcomes), f.strict, out);
}

// ---------------------------------------------------------------------------
// eval

struct EvalFlags {
  std::vector<std::string> models;
  std::vector<std::string> adv;
  std::string out;
  bool strict = false;
};

int cmd_eval(const EvalFlags& f, std::ostream& out, Log& log) {
  std::vector<TinyCnn> models;
  for (const std::string& m : f.models) models.push_back(TinyCnn::load(m));
  std::vector<const Classifier*> targets;
  for (const TinyCnn& m : models) targets.push_back(&m);

  const fs::path root(f.out);
  fs::create_directories(root);
  std::ofstream csv = open_csv(root / "eval.csv");
  csv << "source";
  for (const std::string& m : f.models) csv << ',' << fs::path(m).stem().string();
  csv << '\n';

  std::size_t total = 0;
  std::size_t fooled = 0;
  std::size_t skipped = 0;
  for (const std::string& dir : f.adv) {
    const Corpus corpus = require_corpus(dir);
    for (const TinyCnn& m : models) require_labels(corpus, m);
    std::vector<Image> images;
    std::vector<int> labels;
    for (const CorpusEntry& e : corpus.entries) {
      try {
        Image img = read_image(e.image);
        for (const TinyCnn& m : models) require_input(m, img, e.id.c_str());
        images.push_back(std::move(img));
        labels.push_back(e.label);
      } catch (const Error& err) {
        ++skipped;
        log.line("eval " + e.id + ": skipped (" + err.what() + ")");
      }
    }
    if (images.empty()) continue;
    const std::vector<double> rates = evaluate(targets, images, labels);
    csv << fs::path(dir).lexically_normal().string();
    for (double r : rates) {
      csv << ',' << fmt(r);
      fooled += static_cast<std::size_t>(std::lround(r * static_cast<double>(images.size())));
      total += images.size();
    }
    csv << '\n';
  }
  BatchStats s;
  s.n = total;
  s.successes = fooled;
  s.skipped = skipped;
  return finish(s, f.strict, out);
}

// ---------------------------------------------------------------------------
// interpret

struct InterpretFlags {
  std::string model;
  std::string corpus;
  std::vector<std::string> adv;
  std::string out;
  InterpretOptions options;
  bool strict = false;
};

int cmd_interpret(const InterpretFlags& f, std::ostream& out, Log& log) {
  const Corpus corpus = require_corpus(f.corpus);
  const TinyCnn model = TinyCnn::load(f.model);
  require_labels(corpus, model);

  std::vector<std::map<std::string, fs::path>> sources;
  for (const std::string& dir : f.adv) {
    const Corpus adv = require_corpus(dir);
    std::map<std::string, fs::path> by_id;
    for (const CorpusEntry& e : adv.entries) by_id[e.id] = e.image;
    sources.push_back(std::move(by_id));
  }

  const fs::path root(f.out);
  const fs::path maps_dir = root / "maps";
  fs::create_directories(maps_dir);

  struct Row {
    bool ok = false;
    std::vector<std::string> lines;
    std::vector<bool> fooled;
    std::optional<double> consistency;
  };
  std::vector<Row> rows(corpus.entries.size());
  parallel_for(corpus.entries.size(), [&](std::size_t i) {
    const CorpusEntry& e = corpus.entries[i];
    Row& row = rows[i];
    try {
      const Image real = read_image(e.image);
      require_input(model, real, e.id.c_str());
      std::vector<Image> maps;
      for (std::size_t s = 0; s < sources.size(); ++s) {
        const auto it = sources[s].find(e.id);
        if (it == sources[s].end()) fail(Errc::MissingFile, "no adversarial image for " + e.id);
        const Image adv = read_image(it->second);
        require_same_shape(adv, real, e.id.c_str());
        const InterpretResult r = interpretable_map(model, adv, real, e.label, f.options);
        const double t = transferability_score(model, adv, e.label);
        const int pred = predict(model, adv).label;
        double mean = 0.0;
        for (double v : r.mask.data) mean += v;
        mean /= static_cast<double>(r.mask.data.size());
        row.fooled.push_back(pred != e.label);
        row.lines.push_back(std::to_string(s) + ',' + e.id + ',' + std::to_string(e.label) + ',' + std::to_string(pred) +
                            ',' + (pred != e.label ? "1" : "0") + ',' + fmt(t) + ',' + fmt(r.objective.front()) + ',' +
                            fmt(r.objective.back()) + ',' + fmt(mean));
        write_png(maps_dir / (e.id + "_s" + std::to_string(s) + ".png"), r.mask);
        maps.push_back(r.mask);
      }
      if (maps.size() >= 2) row.consistency = consistency(maps);
      row.ok = true;
      log.line("interpret " + e.id + ": done");
    } catch (const Error& err) {
      log.line("interpret " + e.id + ": skipped (" + err.what() + ")");
    }
  });

  std::ofstream csv = open_csv(root / "interpret.csv");
  csv << "source,id,label,adv_pred,fooled,t_score,objective_initial,objective_final,mask_mean\n";
  BatchStats s;
  for (const Row& row : rows) {
    if (!row.ok) {
      ++s.skipped;
      continue;
    }
    for (std::size_t k = 0; k < row.lines.size(); ++k) {
      csv << row.lines[k] << '\n';
      ++s.n;
      s.successes += row.fooled[k];
    }
  }
  if (sources.size() >= 2) {
    std::ofstream cons = open_csv(root / "consistency.csv");
    cons << "id,consistency\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].consistency) cons << corpus.entries[i].id << ',' << fmt(*rows[i].consistency) << '\n';
  }
  return finish(s, f.strict, out);
}

// ---------------------------------------------------------------------------
// train / make-corpus

struct TrainFlags {
  std::string corpus;
  std::string test_corpus;
  std::string out;
  int classes = 0;
  TrainOptions options;
};

int cmd_train(const TrainFlags& f, std::ostream& out) {
  const Corpus train_corpus = require_corpus(f.corpus);
  const Dataset train_set = load_dataset(train_corpus);
  Dataset test_set;
  if (!f.test_corpus.empty()) test_set = load_dataset(require_corpus(f.test_corpus));

  int classes = f.classes;
  for (const Sample& s : train_set) classes = std::max(classes, s.label + 1);
  if (classes < 2) throw ConfigFailure("training needs at least two classes");
  const Image& first = train_set.front().image;
  TinyCnn model = TinyCnn::initialized({first.height, first.width, first.channels}, classes, f.options.seed);
  const std::vector<EpochStats> stats = train(model, train_set, test_set, f.options);

  out << "epoch,mean_loss,train_accuracy,test_accuracy\n";
  for (const EpochStats& e : stats) {
    out << e.epoch << ',' << fmt(e.mean_loss) << ',' << fmt(e.train_accuracy) << ',' << fmt(e.test_accuracy) << '\n';
  }
  const fs::path path(f.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  model.save(path);
  return kExitOk;
}

int cmd_make_corpus(const ShapesOptions& options, const std::string& out_dir, std::ostream& out) {
  const std::vector<ShapeSample> samples = make_shapes(options);
  const Corpus corpus = write_shapes_corpus(out_dir, samples);
  out << "wrote " << corpus.entries.size() << " images to " << out_dir << '\n';
  return kExitOk;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  std::string t = s.substr(b, e - b + 1);
  if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) t = t.substr(1, t.size() - 2);
  return t;
}

/// Replaces `--config <file>` by one `--key=value` token per file line,
/// placed directly after the subcommand so later command-line flags win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return args;
  std::ifstream in(*path);
  if (!in) fail(Errc::MissingFile, "cannot open config file " + *path);

  std::vector<std::string> tokens;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigFailure(*path + ":" + std::to_string(row) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty()) throw ConfigFailure(*path + ":" + std::to_string(row) + ": empty key");
    tokens.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  const std::ptrdiff_t at = args.size() > 1 ? 2 : static_cast<std::ptrdiff_t>(args.size());
  args.insert(args.begin() + at, tokens.begin(), tokens.end());
  return args;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Motion-blur adversarial attacks on small image classifiers", "blurforge"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  AttackFlags attack;
  CLI::App* attack_cmd = app.add_subcommand("attack", "attack every corpus image");
  add_io_flags(attack_cmd, attack);
  add_attack_flags(attack_cmd, attack);
  attack_cmd->add_option("--baseline", attack.baseline, "fgsm | mifgsm | gauss | defocus");
  attack_cmd->add_option("--region", attack.region, "whole | obj | bg (blur baselines)")->capture_default_str();
  attack_cmd->add_option("--eps-a", attack.eps_a, "L-inf budget of fgsm/mifgsm")->capture_default_str();
  attack_cmd->add_option("--blur-size", attack.blur_size, "sigma / disk diameter of blur baselines")
      ->capture_default_str();

  AttackFlags sweep;
  std::string sweep_param = "eps";
  std::string sweep_values;
  std::string sweep_bg;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "success rate over a parameter grid");
  add_io_flags(sweep_cmd, sweep);
  add_attack_flags(sweep_cmd, sweep);
  sweep_cmd->add_option("--param", sweep_param, "eps | eps-theta | direction")->capture_default_str();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated grid (default: full grid)");
  sweep_cmd->add_option("--bg-directions", sweep_bg, "background directions averaged per object direction");

  AttackFlags physical;
  double depth = 1.0;
  CameraIntrinsics intrinsics;
  CLI::App* physical_cmd = app.add_subcommand("physical", "camera-motion attack with metric translations");
  add_io_flags(physical_cmd, physical);
  add_attack_flags(physical_cmd, physical);
  physical_cmd->add_option("--depth", depth, "object depth in meters")->capture_default_str();
  physical_cmd->add_option("--fx", intrinsics.fx, "focal length x in pixels")->capture_default_str();
  physical_cmd->add_option("--fy", intrinsics.fy, "focal length y in pixels")->capture_default_str();
  physical_cmd->add_option("--cx", intrinsics.cx, "principal point x")->capture_default_str();
  physical_cmd->add_option("--cy", intrinsics.cy, "principal point y")->capture_default_str();

  EvalFlags eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "success-rate matrix of adversarial sets against models");
  eval_cmd->add_option("--model", eval.models, "TinyCnn checkpoint (repeatable)")->required();
  eval_cmd->add_option("--adv", eval.adv, "adversarial set directory with labels.csv (repeatable)")->required();
  eval_cmd->add_option("--out", eval.out, "output directory")->required();
  eval_cmd->add_flag("--strict", eval.strict, "exit 2 when any entry is skipped");

  InterpretFlags interpret;
  CLI::App* interpret_cmd = app.add_subcommand("interpret", "interpretable maps, transferability and consistency");
  interpret_cmd->add_option("--model", interpret.model, "TinyCnn checkpoint")->required();
  interpret_cmd->add_option("--corpus", interpret.corpus, "clean corpus directory")->required();
  interpret_cmd->add_option("--adv", interpret.adv, "adversarial set directory (repeatable)")->required();
  interpret_cmd->add_option("--out", interpret.out, "output directory")->required();
  interpret_cmd->add_option("--iters", interpret.options.iterations, "descent steps")->capture_default_str();
  interpret_cmd->add_option("--lambda-l1", interpret.options.lambda_l1, "L1 weight")->capture_default_str();
  interpret_cmd->add_option("--lambda-tv", interpret.options.lambda_tv, "TV weight")->capture_default_str();
  interpret_cmd->add_option("--lr", interpret.options.lr, "step size")->capture_default_str();
  interpret_cmd->add_flag("--strict", interpret.strict, "exit 2 when any entry is skipped");

  TrainFlags training;
  CLI::App* train_cmd = app.add_subcommand("train", "train a TinyCnn on a corpus");
  train_cmd->add_option("--corpus", training.corpus, "training corpus")->required();
  train_cmd->add_option("--test-corpus", training.test_corpus, "held-out corpus");
  train_cmd->add_option("--out", training.out, "checkpoint path")->required();
  train_cmd->add_option("--classes", training.classes, "class count (default: from labels)");
  train_cmd->add_option("--epochs", training.options.epochs, "epochs")->capture_default_str();
  train_cmd->add_option("--lr", training.options.lr, "learning rate")->capture_default_str();
  train_cmd->add_option("--seed", training.options.seed, "seed")->capture_default_str();

  ShapesOptions shapes;
  std::string shapes_out;
  CLI::App* shapes_cmd = app.add_subcommand("make-corpus", "write a seeded synthetic-shapes corpus");
  shapes_cmd->add_option("--out", shapes_out, "output directory")->required();
  shapes_cmd->add_option("--count", shapes.count, "image count")->capture_default_str();
  shapes_cmd->add_option("--size", shapes.size, "side length")->capture_default_str();
  shapes_cmd->add_option("--classes", shapes.num_classes, "class count (2 to 4)")->capture_default_str();
  shapes_cmd->add_option("--noise", shapes.noise, "pixel noise std")->capture_default_str();
  shapes_cmd->add_option("--seed", shapes.seed, "seed")->capture_default_str();

  for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; })) {
    for (CLI::Option* opt : sub->get_options()) {
      if (opt->get_items_expected_max() == 1) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }

  std::vector<std::string> expanded;
  try {
    expanded = expand_config(args);
  } catch (const ConfigFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  }
  std::vector<const char*> argv;
  for (const std::string& a : expanded) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    std::ostringstream sink_out;
    std::ostringstream sink_err;
    const int code = app.exit(e, sink_out, sink_err);
    out << sink_out.str();
    err << sink_err.str();
    return code == 0 ? kExitOk : kExitConfig;
  }

  Log log(err);
  try {
    if (attack_cmd->parsed()) return cmd_attack(attack, out, log);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep, sweep_param, sweep_values, sweep_bg, out, log);
    if (physical_cmd->parsed()) return cmd_physical(physical, depth, intrinsics, out, log);
    if (eval_cmd->parsed()) return cmd_eval(eval, out, log);
    if (interpret_cmd->parsed()) return cmd_interpret(interpret, out, log);
    if (train_cmd->parsed()) return cmd_train(training, out);
    if (shapes_cmd->parsed()) return cmd_make_corpus(shapes, shapes_out, out);
  } catch (const ConfigFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace blurforge::cli
