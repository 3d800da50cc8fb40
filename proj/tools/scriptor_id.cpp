// scriptor-id: command-line front end for the writer-identification pipeline.
//   synth       generate a synthetic labeled corpus
//   preprocess  page images -> ink-guided 64x64 patches + manifest
//   train       train an extractor + classifier head on a corpus
//   eval        evaluate a checkpoint (single/multi tuple, sweeps, plots)

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "scriptor/config.hpp"
#include "scriptor/dataset.hpp"
#include "scriptor/errors.hpp"
#include "scriptor/image.hpp"
#include "scriptor/preprocess.hpp"
#include "scriptor/rng.hpp"
#include "scriptor/synthdata.hpp"
#include "scriptor/traineval.hpp"

namespace fs = std::filesystem;
using namespace scriptor;

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  bool plot = false;
  bool has_seed = false;
  std::uint64_t seed = 0;
};

ExperimentConfig load_with_overrides(const CliOptions& opt) {
  ExperimentConfig cfg = load_config(opt.config_path);
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (opt.has_seed) {
    cfg.corpus.seed = opt.seed;
    cfg.training.seed = opt.seed;
    cfg.patch_extraction.seed = opt.seed;
  }
  return cfg;
}

fs::path corpus_manifest(const ExperimentConfig& cfg, const char* split) {
  const fs::path dir = cfg.corpus_dir.empty() ? cfg.out_dir / "corpus" : cfg.corpus_dir;
  return dir / (std::string("manifest_") + split + ".tsv");
}

std::string spec_string(const NetworkSpec& s) {
  std::string out = variant_name(s.variant) + "(filters=";
  for (std::size_t i = 0; i < s.block_filters.size(); ++i)
    out += (i ? "," : "") + std::to_string(s.block_filters[i]);
  if (s.fc_width > 0) out += ";fc=" + std::to_string(s.fc_width);
  return out + ")";
}

int cmd_synth(const CliOptions& opt) {
  const ExperimentConfig cfg = load_with_overrides(opt);
  const fs::path dir = cfg.corpus_dir.empty() ? cfg.out_dir / "corpus" : cfg.corpus_dir;
  const CorpusPaths paths = generate_corpus(cfg.corpus, dir);
  std::cout << "corpus written to " << dir.string() << "\n"
            << "  writers: " << cfg.corpus.num_writers << "\n"
            << "  patches per writer: " << cfg.corpus.patches_per_writer << "\n"
            << "  splits: " << paths.train_manifest.filename().string() << " "
            << paths.val_manifest.filename().string() << " "
            << paths.test_manifest.filename().string() << "\n";
  return 0;
}

// Writer id of a page = leading digits of the file stem ("12_page3.png"
// -> 12); pages without one get sequential ids.
int page_writer_id(const std::string& stem, int fallback) {
  std::size_t i = 0;
  while (i < stem.size() && std::isdigit(static_cast<unsigned char>(stem[i]))) ++i;
  if (i == 0) return fallback;
  return std::stoi(stem.substr(0, i));
}

int cmd_preprocess(const CliOptions& opt) {
  const ExperimentConfig cfg = load_with_overrides(opt);
  if (cfg.pages_dir.empty()) throw config_error("preprocess requires [paths] pages_dir");
  if (!fs::is_directory(cfg.pages_dir))
    throw io_error("pages_dir does not exist: " + cfg.pages_dir.string());

  std::vector<fs::path> pages;
  for (const auto& entry : fs::directory_iterator(cfg.pages_dir)) {
    const std::string ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".png" || ext == ".PGM" || ext == ".PNG")
      pages.push_back(entry.path());
  }
  std::sort(pages.begin(), pages.end());
  if (pages.empty()) throw data_error("no PGM/PNG pages found in " + cfg.pages_dir.string());

  fs::create_directories(cfg.out_dir);
  std::vector<PatchRecord> combined;
  int fallback_id = 0;
  for (const fs::path& page_path : pages) {
    const std::string stem = page_path.stem().string();
    const int writer = page_writer_id(stem, fallback_id++);
    const GrayImage page = read_image(page_path);
    const OtsuResult otsu = binarize_otsu(page);
    const InkProbabilityMap map = ink_probability_map(otsu.binary, cfg.patch_extraction.filter_window);

    PatchExtractionConfig pcfg = cfg.patch_extraction;
    pcfg.seed = mix_seed(cfg.patch_extraction.seed, std::hash<std::string>{}(stem));
    std::vector<SampledPatch> patches;
    try {
      patches = sample_patches(page, map, pcfg);
    } catch (const data_error&) {
      std::cerr << "warning: " << page_path.string() << ": no ink found, skipping\n";
      continue;
    }

    const fs::path page_dir = cfg.out_dir / stem;
    fs::create_directories(page_dir);
    std::vector<PatchRecord> page_records;
    for (std::size_t i = 0; i < patches.size(); ++i) {
      const std::string name = stem + "_patch" + std::to_string(i) + ".pgm";
      write_pgm(page_dir / name, patches[i].image);
      page_records.push_back(
          PatchRecord{name, patches[i].center_x, patches[i].center_y, writer});
      combined.push_back(
          PatchRecord{stem + "/" + name, patches[i].center_x, patches[i].center_y, writer});
    }
    write_manifest(page_dir / "manifest.tsv", page_records);
    std::cout << page_path.filename().string() << ": " << patches.size() << " patches (otsu t="
              << otsu.threshold << ")\n";
  }
  write_manifest(cfg.out_dir / "manifest.tsv", combined);
  std::cout << "combined manifest: " << (cfg.out_dir / "manifest.tsv").string() << "\n";
  return 0;
}

int cmd_train(const CliOptions& opt) {
  const ExperimentConfig cfg = load_with_overrides(opt);
  const PatchSet train_set = load_patch_set(corpus_manifest(cfg, "train"));
  const PatchSet val_set = load_patch_set(corpus_manifest(cfg, "val"));

  TrainingConfig tcfg = cfg.training;
  tcfg.net = cfg.network;
  auto [model, history] = train(tcfg, train_set, val_set);

  fs::create_directories(cfg.out_dir);
  const fs::path ckpt = cfg.checkpoint.empty() ? cfg.out_dir / "checkpoint.txt" : cfg.checkpoint;
  save_checkpoint(ckpt, model);
  write_history_csv(cfg.out_dir / "history.csv", history);
  std::printf("best validation top-1: %.2f%% (epoch %d of %zu)\n", history.best_val_top1,
              history.best_epoch, history.epochs.size());
  std::cout << "checkpoint: " << ckpt.string() << "\n";
  return 0;
}

void write_svg_chart(const fs::path& path, const std::string& x_label,
                     const std::vector<double>& xs, const std::vector<double>& ys) {
  const double w = 480, h = 320, ml = 50, mr = 20, mt = 20, mb = 40;
  double x_min = xs.front(), x_max = xs.front();
  for (double x : xs) {
    x_min = std::min(x_min, x);
    x_max = std::max(x_max, x);
  }
  if (x_max == x_min) x_max = x_min + 1;
  auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - y / 100.0 * (h - mt - mb); };

  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  out << "<rect width='" << w << "' height='" << h << "' fill='white'/>\n";
  out << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  out << "<text x='" << w / 2 << "' y='" << h - 8 << "' text-anchor='middle' font-size='12'>"
      << x_label << "</text>\n";
  out << "<text x='14' y='" << h / 2 << "' text-anchor='middle' font-size='12' "
      << "transform='rotate(-90 14 " << h / 2 << ")'>mean top-1 (%)</text>\n";
  out << "<polyline fill='none' stroke='steelblue' stroke-width='2' points='";
  for (std::size_t i = 0; i < xs.size(); ++i) out << px(xs[i]) << "," << py(ys[i]) << " ";
  out << "'/>\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out << "<circle cx='" << px(xs[i]) << "' cy='" << py(ys[i]) << "' r='3' fill='steelblue'/>\n";
    out << "<text x='" << px(xs[i]) << "' y='" << h - mb + 16 << "' text-anchor='middle' "
        << "font-size='10'>" << xs[i] << "</text>\n";
  }
  out << "</svg>\n";
}

int cmd_eval(const CliOptions& opt) {
  const ExperimentConfig cfg = load_with_overrides(opt);
  const fs::path ckpt = cfg.checkpoint.empty() ? cfg.out_dir / "checkpoint.txt" : cfg.checkpoint;
  const Model model = load_checkpoint(ckpt);
  if (!(model.net.spec == cfg.network))
    throw spec_error("checkpoint spec " + spec_string(model.net.spec) +
                     " does not match configured spec " + spec_string(cfg.network));

  const PatchSet test_set = load_patch_set(corpus_manifest(cfg, "test"));
  fs::create_directories(cfg.out_dir);
  const std::uint64_t seed = opt.has_seed ? opt.seed : cfg.training.seed;

  std::vector<SweepRow> rows;
  if (cfg.has_sweep()) {
    const PatchSet train_set = load_patch_set(corpus_manifest(cfg, "train"));
    const PatchSet val_set = load_patch_set(corpus_manifest(cfg, "val"));
    std::vector<SweepCell> grid;
    const std::vector<int> ns = cfg.sweep_n.empty() ? std::vector<int>{cfg.training.n} : cfg.sweep_n;
    const std::vector<int> ws = cfg.sweep_writers.empty() ? std::vector<int>{0} : cfg.sweep_writers;
    const std::vector<int> ps = cfg.sweep_patches.empty() ? std::vector<int>{0} : cfg.sweep_patches;
    const std::vector<std::string> as = cfg.sweep_aggregation.empty()
                                            ? std::vector<std::string>{aggregation_name(cfg.training.agg)}
                                            : cfg.sweep_aggregation;
    const std::vector<int> ks = cfg.sweep_k.empty() ? std::vector<int>{cfg.training.agg_k} : cfg.sweep_k;
    for (int n : ns)
      for (int w : ws)
        for (int p : ps)
          for (const std::string& a : as)
            for (int k : ks)
              grid.push_back(SweepCell{n, p, w, aggregation_from_name(a), k});
    TrainingConfig base = cfg.training;
    base.net = cfg.network;
    rows = sweep(grid, base, train_set, val_set, test_set, cfg.k_list, cfg.trials, seed);
  } else {
    SweepRow row;
    row.experiment = cfg.multi_tuple_t > 1 ? "multi_tuple" : "single_tuple";
    row.cell = SweepCell{cfg.training.n, 0, static_cast<int>(test_set.by_writer.size()),
                         model.agg, model.agg_k};
    row.seed = seed;
    row.report = evaluate_multi_tuple(model, test_set, cfg.training.n, cfg.multi_tuple_t,
                                      cfg.k_list, cfg.trials, seed)
                     .report;
    row.ok = true;
    rows.push_back(std::move(row));
  }

  const fs::path results = cfg.out_dir / "results.csv";
  write_results_csv(results, rows);
  std::cout << "results: " << results.string() << "\n";
  for (const SweepRow& row : rows) {
    if (!row.ok) {
      std::cout << "  cell n=" << row.cell.n << " failed: " << row.error << "\n";
      continue;
    }
    std::printf("  %s n=%d writers=%d %s: mean top-1 = %.2f%%\n", row.experiment.c_str(),
                row.cell.n, row.cell.writers, aggregation_name(row.cell.agg).c_str(),
                row.report.mean[0]);
  }

  if (opt.plot) {
    std::vector<double> xs, ys;
    std::string x_label = "tuple size n";
    for (const SweepRow& row : rows) {
      if (!row.ok) continue;
      double x = row.cell.n;
      if (!cfg.sweep_writers.empty()) {
        x = row.cell.writers;
        x_label = "writers";
      } else if (!cfg.sweep_patches.empty() && cfg.sweep_n.empty()) {
        x = row.cell.patches_per_writer;
        x_label = "patches per writer";
      }
      xs.push_back(x);
      ys.push_back(row.report.mean[0]);
    }
    if (!xs.empty()) {
      write_svg_chart(cfg.out_dir / "accuracy.svg", x_label, xs, ys);
      std::cout << "plot: " << (cfg.out_dir / "accuracy.svg").string() << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"text-independent writer identification toolkit"};
  app.require_subcommand(1);

  CliOptions opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "configuration file")->required();
    sub->add_option("--out", opt.out_dir, "output directory (overrides [paths] out_dir)");
    sub->add_option("--seed", opt.seed, "master seed override")
        ->each([&](const std::string&) { opt.has_seed = true; });
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(synth);
  CLI::App* preprocess = app.add_subcommand("preprocess", "extract patches from page images");
  add_common(preprocess);
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd);
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_flag("--plot", opt.plot, "write an SVG accuracy chart");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(opt);
    if (preprocess->parsed()) return cmd_preprocess(opt);
    if (train_cmd->parsed()) return cmd_train(opt);
    if (eval_cmd->parsed()) return cmd_eval(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
