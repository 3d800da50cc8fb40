#include "scriptor/traineval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "scriptor/errors.hpp"
#include "scriptor/parallel.hpp"
#include "scriptor/rng.hpp"
#include "scriptor/sampling.hpp"

namespace scriptor {

namespace {

std::map<int, std::vector<int>> patch_id_map(const PatchSet& set) {
  std::map<int, std::vector<int>> ids;
  for (const auto& [writer, patches] : set.by_writer) {
    std::vector<int> v(patches.size());
    std::iota(v.begin(), v.end(), 0);
    ids.emplace(writer, std::move(v));
  }
  return ids;
}

struct TupleWork {
  double loss = 0.0;
  std::vector<Tensor> grads;  // net parameter order, then head weight, bias
};

// Forward + backward of one n-tuple against the current parameters.
TupleWork tuple_step(const Network& net, const ClassifierHead& head, Aggregation agg, int agg_k,
                     const std::vector<const Tensor*>& patches, std::size_t label) {
  const std::size_t n = patches.size();
  std::vector<LocalFeatureMap> locals(n);
  std::vector<ForwardContext> ctxs(n);
  parallel_for(n, [&](std::size_t i) { locals[i] = forward_local(net, *patches[i], &ctxs[i]); });

  auto [global, agg_ctx] = aggregate(agg, locals, agg_k);
  const Tensor logits = classify(global.values, head);
  SoftmaxXentResult loss = softmax_cross_entropy(logits, label);

  LayerGradients head_grads = linear_backward(global.values, head.weight, loss.d_logits);
  std::vector<Tensor> d_locals = aggregate_backward(agg_ctx, head_grads.d_input);

  std::vector<std::vector<Tensor>> member_grads(n);
  parallel_for(n, [&](std::size_t i) { member_grads[i] = backward_local(net, ctxs[i], d_locals[i]); });

  TupleWork work;
  work.loss = loss.loss;
  work.grads = std::move(member_grads[0]);
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t t = 0; t < work.grads.size(); ++t)
      for (std::size_t j = 0; j < work.grads[t].size(); ++j)
        work.grads[t][j] += member_grads[i][t][j];
  work.grads.push_back(std::move(head_grads.d_params[0]));
  work.grads.push_back(std::move(head_grads.d_params[1]));
  return work;
}

// Single-tuple steps at the usual learning rate occasionally spike and
// zero out the ReLU stack for good; capping the global gradient norm
// keeps the update rule intact while bounding the step size.
constexpr double kGradClipNorm = 1.0;

void clip_gradients(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data) sq += v * v;
  if (sq <= max_norm * max_norm) return;
  const double scale = max_norm / std::sqrt(sq);
  for (Tensor& g : grads)
    for (double& v : g.data) v *= scale;
}

std::size_t label_of(const std::vector<int>& writer_ids, int writer) {
  const auto it = std::lower_bound(writer_ids.begin(), writer_ids.end(), writer);
  if (it == writer_ids.end() || *it != writer)
    throw data_error("writer " + std::to_string(writer) + " is not enrolled in the model");
  return static_cast<std::size_t>(it - writer_ids.begin());
}

// Rank of the true class under descending probability, ties to the
// lower class index.
std::size_t rank_of(const Tensor& scores, std::size_t truth) {
  std::size_t rank = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == truth) continue;
    if (scores[i] > scores[truth] || (scores[i] == scores[truth] && i < truth)) ++rank;
  }
  return rank;
}

}  // namespace

Tensor model_logits(const Model& model, const std::vector<Tensor>& tuple_patches) {
  std::vector<LocalFeatureMap> locals(tuple_patches.size());
  for (std::size_t i = 0; i < tuple_patches.size(); ++i)
    locals[i] = forward_local(model.net, tuple_patches[i]);
  auto [global, ctx] = aggregate(model.agg, locals, model.agg_k);
  return classify(global.values, model.head);
}

std::pair<Model, TrainingHistory> train(const TrainingConfig& cfg, const PatchSet& train_set,
                                        const PatchSet& val_set) {
  cfg.net.validate();
  if (cfg.n < 1) throw parameter_error("train: tuple size n must be >= 1");
  if (cfg.patience < 1) throw parameter_error("train: patience must be >= 1");
  for (const auto& [writer, patches] : train_set.by_writer)
    if (static_cast<int>(patches.size()) < cfg.n)
      throw data_error("writer " + std::to_string(writer) + " has fewer than n training patches");
  for (const auto& [writer, patches] : val_set.by_writer)
    if (static_cast<int>(patches.size()) < cfg.n)
      throw data_error("writer " + std::to_string(writer) + " has fewer than n validation patches");
  if (train_set.writer_ids() != val_set.writer_ids())
    throw data_error("train: training and validation sets must cover the same writers");

  Model model;
  model.writer_ids = train_set.writer_ids();
  model.agg = cfg.agg;
  model.agg_k = cfg.agg_k;
  model.n = cfg.n;
  model.net = build_network(cfg.net, mix_seed(cfg.seed, 0x6e6574ULL));
  model.head = build_head(static_cast<int>(model.writer_ids.size()), cfg.net.depth(),
                          mix_seed(cfg.seed, 0x68656164ULL));

  std::vector<Tensor*> params = model.net.parameters();
  params.push_back(&model.head.weight);
  params.push_back(&model.head.bias);
  OptimizerState opt = make_optimizer_state(params, cfg.learning_rate, cfg.momentum);

  const std::map<int, std::vector<int>> ids = patch_id_map(train_set);

  TrainingHistory history;
  Model best = model;
  history.best_epoch = 0;
  history.best_val_top1 = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const EpochPlan plan =
        make_epoch_plan(ids, cfg.n, cfg.p, mix_seed(cfg.seed, 0x65706f6368ULL,
                                                    static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0;
    std::size_t tuples = 0;
    for (int it = 0; it < cfg.p; ++it) {
      for (const TupleBatch& batch : iteration_batches(plan, it)) {
        std::vector<const Tensor*> patches;
        patches.reserve(batch.patch_ids.size());
        for (int pid : batch.patch_ids)
          patches.push_back(&train_set.by_writer.at(batch.writer)[static_cast<std::size_t>(pid)]);
        TupleWork work = tuple_step(model.net, model.head, cfg.agg, cfg.agg_k, patches,
                                    label_of(model.writer_ids, batch.writer));
        clip_gradients(work.grads, kGradClipNorm);
        std::vector<const Tensor*> grads;
        grads.reserve(work.grads.size());
        for (const Tensor& g : work.grads) grads.push_back(&g);
        sgd_step(params, grads, opt);
        loss_sum += work.loss;
        ++tuples;
      }
    }

    const EvalReport val = evaluate_topk(model, val_set, cfg.n, {1}, 1,
                                         mix_seed(cfg.seed, 0x76616cULL,
                                                  static_cast<std::uint64_t>(epoch)));
    const double val_top1 = val.mean[0];
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.epochs.push_back(EpochRecord{epoch, loss_sum / static_cast<double>(tuples), val_top1,
                                         secs});
    // the coarse single-trial validation score saturates long before the
    // loss settles, so equal validation scores are tie-broken by training
    // loss; the checkpoint with the largest margins wins
    const double epoch_loss = loss_sum / static_cast<double>(tuples);
    if (val_top1 > history.best_val_top1 ||
        (val_top1 == history.best_val_top1 && epoch_loss < best_loss)) {
      history.best_val_top1 = val_top1;
      history.best_epoch = epoch;
      best_loss = epoch_loss;
      best = model;
    }
    if (epoch - history.best_epoch >= cfg.patience) break;
  }
  return {std::move(best), std::move(history)};
}

MultiTupleResult evaluate_multi_tuple(const Model& model, const PatchSet& eval_set, int n, int t,
                                      const std::vector<int>& k_list, int trials,
                                      std::uint64_t seed) {
  if (n < 1 || t < 1) throw parameter_error("evaluate: n and t must be >= 1");
  if (trials < 1) throw parameter_error("evaluate: trials must be >= 1");
  if (k_list.empty()) throw parameter_error("evaluate: k_list must not be empty");
  for (const auto& [writer, patches] : eval_set.by_writer)
    if (static_cast<int>(patches.size()) < n * t)
      throw data_error("writer " + std::to_string(writer) + " has " +
                       std::to_string(patches.size()) + " patches, need " + std::to_string(n * t) +
                       " for " + std::to_string(t) + " disjoint " + std::to_string(n) + "-tuples");

  std::vector<int> writers;
  for (const auto& [w, _] : eval_set.by_writer) writers.push_back(w);
  const std::size_t nw = writers.size();

  MultiTupleResult result;
  result.report.k_list = k_list;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<std::size_t> ranks(nw);
    std::vector<std::size_t> preds(nw);
    parallel_for(nw, [&](std::size_t wi) {
      const int writer = writers[wi];
      const std::vector<Tensor>& pool = eval_set.by_writer.at(writer);
      std::vector<int> perm(pool.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::mt19937_64 rng = make_rng(mix_seed(mix_seed(seed, 0x6576616cULL),
                                              static_cast<std::uint64_t>(trial),
                                              static_cast<std::uint64_t>(writer)));
      std::shuffle(perm.begin(), perm.end(), rng);

      // t disjoint tuples from one permutation; fuse by averaging softmax
      Tensor mean_probs({model.head.num_writers()});
      for (int tuple = 0; tuple < t; ++tuple) {
        std::vector<Tensor> members;
        members.reserve(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
          members.push_back(pool[static_cast<std::size_t>(perm[tuple * n + j])]);
        const Tensor probs = softmax(model_logits(model, members));
        for (std::size_t i = 0; i < mean_probs.size(); ++i) mean_probs[i] += probs[i];
      }
      for (double& v : mean_probs.data) v /= static_cast<double>(t);

      ranks[wi] = rank_of(mean_probs, label_of(model.writer_ids, writer));
      preds[wi] = predict(mean_probs);
    });

    std::vector<double> accs;
    accs.reserve(k_list.size());
    for (int k : k_list) {
      std::size_t hits = 0;
      for (std::size_t r : ranks)
        if (r < static_cast<std::size_t>(k)) ++hits;
      accs.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(nw));
    }
    result.report.per_trial.push_back(std::move(accs));
    if (trial == trials - 1)
      for (std::size_t wi = 0; wi < nw; ++wi)
        result.predictions[writers[wi]] = model.writer_ids[preds[wi]];
  }

  result.report.mean.assign(k_list.size(), 0.0);
  result.report.variance.assign(k_list.size(), 0.0);
  for (std::size_t ki = 0; ki < k_list.size(); ++ki) {
    double m = 0.0;
    for (const auto& row : result.report.per_trial) m += row[ki];
    m /= static_cast<double>(trials);
    double v = 0.0;
    for (const auto& row : result.report.per_trial) v += (row[ki] - m) * (row[ki] - m);
    result.report.mean[ki] = m;
    result.report.variance[ki] = v / static_cast<double>(trials);
  }
  return result;
}

EvalReport evaluate_topk(const Model& model, const PatchSet& eval_set, int n,
                         const std::vector<int>& k_list, int trials, std::uint64_t seed) {
  return evaluate_multi_tuple(model, eval_set, n, 1, k_list, trials, seed).report;
}

std::uint64_t sweep_cell_seed(std::uint64_t master_seed, const SweepCell& cell) {
  std::uint64_t s = mix_seed(master_seed, 0x7377656570ULL);
  s = mix_seed(s, static_cast<std::uint64_t>(cell.n));
  s = mix_seed(s, static_cast<std::uint64_t>(cell.patches_per_writer));
  s = mix_seed(s, static_cast<std::uint64_t>(cell.writers));
  s = mix_seed(s, static_cast<std::uint64_t>(cell.agg));
  return mix_seed(s, static_cast<std::uint64_t>(cell.agg_k));
}

std::vector<SweepRow> sweep(const std::vector<SweepCell>& grid, const TrainingConfig& base,
                            const PatchSet& train_set, const PatchSet& val_set,
                            const PatchSet& test_set, const std::vector<int>& k_list, int trials,
                            std::uint64_t master_seed) {
  std::vector<SweepRow> rows;
  for (const SweepCell& cell : grid) {
    SweepRow row;
    row.experiment = "sweep";
    row.cell = cell;
    row.seed = sweep_cell_seed(master_seed, cell);
    try {
      TrainingConfig cfg = base;
      cfg.n = cell.n;
      cfg.agg = cell.agg;
      cfg.agg_k = cell.agg_k;
      cfg.seed = row.seed;
      const PatchSet tr = train_set.subset(cell.writers, cell.patches_per_writer);
      const PatchSet va = val_set.subset(cell.writers, 0);
      const PatchSet te = test_set.subset(cell.writers, 0);
      auto [model, history] = train(cfg, tr, va);
      row.report = evaluate_topk(model, te, cell.n, k_list, trials,
                                 mix_seed(row.seed, 0x74657374ULL));
      row.epochs = static_cast<int>(history.epochs.size());
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- checkpoint serialization ----
// Line-oriented text format, format version first. Parameter values are
// written as C hexfloats, so a load/save round trip is bit exact.

namespace {

void write_tensor(std::ofstream& out, const std::string& name, const Tensor& t) {
  out << "tensor " << name << " " << t.rank();
  for (std::size_t e : t.shape) out << " " << e;
  out << "\n";
  char buf[40];
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%a", t[i]);
    out << buf << (i + 1 == t.size() || (i + 1) % 8 == 0 ? '\n' : ' ');
  }
}

void read_tensor(std::ifstream& in, const std::string& expect_name, Tensor& t) {
  std::string tag, name;
  std::size_t rank;
  if (!(in >> tag >> name >> rank) || tag != "tensor" || name != expect_name)
    throw io_error("checkpoint: expected tensor " + expect_name);
  std::vector<std::size_t> shape(rank);
  for (std::size_t& e : shape) in >> e;
  if (shape != t.shape) throw io_error("checkpoint: shape mismatch for " + expect_name);
  std::string tok;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(in >> tok)) throw io_error("checkpoint: truncated values for " + expect_name);
    t[i] = std::strtod(tok.c_str(), nullptr);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << "scriptor-checkpoint 1\n";
  out << "variant " << variant_name(model.net.spec.variant) << "\n";
  out << "filters";
  for (int f : model.net.spec.block_filters) out << " " << f;
  out << "\n";
  out << "kernel " << model.net.spec.kernel << "\n";
  out << "pad " << model.net.spec.pad << "\n";
  out << "conv_stride " << model.net.spec.conv_stride << "\n";
  out << "pool " << model.net.spec.pool << "\n";
  out << "fc_width " << model.net.spec.fc_width << "\n";
  out << "aggregation " << aggregation_name(model.agg) << "\n";
  out << "agg_k " << model.agg_k << "\n";
  out << "n " << model.n << "\n";
  out << "writers";
  for (int w : model.writer_ids) out << " " << w;
  out << "\n";
  for (std::size_t b = 0; b < model.net.conv_weights.size(); ++b) {
    write_tensor(out, "conv_weight" + std::to_string(b), model.net.conv_weights[b]);
    write_tensor(out, "conv_bias" + std::to_string(b), model.net.conv_biases[b]);
  }
  if (model.net.spec.fc_width > 0) {
    write_tensor(out, "fc_weight", model.net.fc_weight);
    write_tensor(out, "fc_bias", model.net.fc_bias);
  }
  write_tensor(out, "head_weight", model.head.weight);
  write_tensor(out, "head_bias", model.head.bias);
  out << "end\n";
  if (!out) throw io_error("failed writing " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "scriptor-checkpoint" || version != 1)
    throw io_error(path.string() + ": not a version-1 checkpoint");

  NetworkSpec spec;
  Model model;
  std::string key;
  while (in >> key) {
    if (key == "variant") {
      std::string v;
      in >> v;
      spec.variant = variant_from_name(v);
    } else if (key == "filters") {
      std::string rest;
      std::getline(in, rest);
      std::istringstream ss(rest);
      int f;
      spec.block_filters.clear();
      while (ss >> f) spec.block_filters.push_back(f);
    } else if (key == "kernel") {
      in >> spec.kernel;
    } else if (key == "pad") {
      in >> spec.pad;
    } else if (key == "conv_stride") {
      in >> spec.conv_stride;
    } else if (key == "pool") {
      in >> spec.pool;
    } else if (key == "fc_width") {
      in >> spec.fc_width;
    } else if (key == "aggregation") {
      std::string a;
      in >> a;
      model.agg = aggregation_from_name(a);
    } else if (key == "agg_k") {
      in >> model.agg_k;
    } else if (key == "n") {
      in >> model.n;
    } else if (key == "writers") {
      std::string rest;
      std::getline(in, rest);
      std::istringstream ss(rest);
      int w;
      while (ss >> w) model.writer_ids.push_back(w);
      break;  // header done; tensors follow
    } else {
      throw io_error(path.string() + ": unknown checkpoint key '" + key + "'");
    }
  }
  if (model.writer_ids.empty()) throw io_error(path.string() + ": missing writer list");

  model.net = build_network(spec, 0);
  for (std::size_t b = 0; b < model.net.conv_weights.size(); ++b) {
    read_tensor(in, "conv_weight" + std::to_string(b), model.net.conv_weights[b]);
    read_tensor(in, "conv_bias" + std::to_string(b), model.net.conv_biases[b]);
  }
  if (spec.fc_width > 0) {
    read_tensor(in, "fc_weight", model.net.fc_weight);
    read_tensor(in, "fc_bias", model.net.fc_bias);
  }
  model.head = build_head(static_cast<int>(model.writer_ids.size()), spec.depth(), 0);
  read_tensor(in, "head_weight", model.head.weight);
  read_tensor(in, "head_bias", model.head.bias);
  std::string tail;
  in >> tail;
  if (tail != "end") throw io_error(path.string() + ": missing end marker");
  return model;
}

// ---- CSV emission ----

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string topk_value(const EvalReport& r, int k, std::size_t trial_or_summary, int mode) {
  // mode 0: trial row, 1: mean, 2: variance
  for (std::size_t ki = 0; ki < r.k_list.size(); ++ki) {
    if (r.k_list[ki] != k) continue;
    if (mode == 1) return fmt_double(r.mean[ki]);
    if (mode == 2) return fmt_double(r.variance[ki]);
    return fmt_double(r.per_trial[trial_or_summary][ki]);
  }
  return "";
}

}  // namespace

void write_history_csv(const std::filesystem::path& path, const TrainingHistory& history) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << "epoch,loss,val_top1,seconds\n";
  for (const EpochRecord& e : history.epochs)
    out << e.epoch << "," << fmt_double(e.loss) << "," << fmt_double(e.val_top1) << ","
        << fmt_double(e.seconds) << "\n";
}

void write_results_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << "experiment,writers,n,N_s,aggregation,K,trial,top1,top5,top10,epochs,seed\n";
  for (const SweepRow& row : rows) {
    const std::string prefix = row.experiment + "," + std::to_string(row.cell.writers) + "," +
                               std::to_string(row.cell.n) + "," +
                               std::to_string(row.cell.patches_per_writer) + "," +
                               aggregation_name(row.cell.agg) + "," +
                               std::to_string(row.cell.agg_k) + ",";
    const std::string suffix = "," + std::to_string(row.epochs) + "," + std::to_string(row.seed);
    if (!row.ok) {
      out << prefix << "failed,,," << suffix.substr(1) << "\n";
      continue;
    }
    for (std::size_t t = 0; t < row.report.per_trial.size(); ++t)
      out << prefix << t << "," << topk_value(row.report, 1, t, 0) << ","
          << topk_value(row.report, 5, t, 0) << "," << topk_value(row.report, 10, t, 0) << suffix
          << "\n";
    out << prefix << "mean," << topk_value(row.report, 1, 0, 1) << ","
        << topk_value(row.report, 5, 0, 1) << "," << topk_value(row.report, 10, 0, 1) << suffix
        << "\n";
    out << prefix << "var," << topk_value(row.report, 1, 0, 2) << ","
        << topk_value(row.report, 5, 0, 2) << "," << topk_value(row.report, 10, 0, 2) << suffix
        << "\n";
  }
  if (!out) throw io_error("failed writing " + path.string());
}

}  // namespace scriptor
