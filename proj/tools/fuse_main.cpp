// nsstfuse: fuse a registered infrared/visible image pair (or a directory
// of pairs) in the shearlet domain and optionally report quality metrics.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "nsf/error.hpp"
#include "nsf/fusion.hpp"
#include "nsf/image.hpp"
#include "nsf/metrics.hpp"
#include "nsf/nsst.hpp"
#include "nsf/run_config.hpp"

namespace fs = std::filesystem;

namespace {

int exit_code_for(nsf::ErrorCode code) {
  switch (code) {
    case nsf::ErrorCode::bad_config:
    case nsf::ErrorCode::invalid_spec:
    case nsf::ErrorCode::invalid_parameter:
    case nsf::ErrorCode::unsupported_filter:
      return 4;
    case nsf::ErrorCode::empty_batch:
      return 3;
    case nsf::ErrorCode::io:
    case nsf::ErrorCode::unsupported_format:
    case nsf::ErrorCode::invalid_image:
    case nsf::ErrorCode::incompatible_pair:
    case nsf::ErrorCode::too_small:
      return 2;
    default:
      return 5;
  }
}

constexpr const char* kCsvHeader =
    "stem,qabf,scd,ms_ssim,ag,ei,q,qw,qe,sf";

std::string csv_row(const std::string& stem, const nsf::metrics::MetricsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", stem.c_str(),
                r.qabf, r.scd, r.ms_ssim, r.ag, r.ei, r.q, r.qw, r.qe, r.sf);
  return std::string(buf);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) nsf::fail(nsf::ErrorCode::io, "cannot write " + path.string());
  out << text;
  if (!out) nsf::fail(nsf::ErrorCode::io, "short write to " + path.string());
}

void write_pair_diagnostics(const nsf::FusionResult& result,
                            const nsf::FusionConfig& cfg,
                            const nsf::GrayImage& ir, const nsf::GrayImage& vis,
                            const fs::path& dir) {
  fs::create_directories(dir);
  nsf::write_diagnostics(result, cfg, dir.string());
  nsf::dump_decomposition(nsf::decompose(ir, cfg.decomposition),
                          (dir / "decomposition_ir").string());
  nsf::dump_decomposition(nsf::decompose(vis, cfg.decomposition),
                          (dir / "decomposition_vis").string());
}

struct BatchPair {
  std::string stem;
  fs::path ir;
  fs::path vis;
};

bool has_image_extension(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".png" || ext == ".pgm";
}

// Pairs <stem>_ir.* with <stem>_vis.*; files following the convention
// without a partner are reported on stderr and skipped.
std::vector<BatchPair> discover_pairs(const fs::path& dir) {
  if (!fs::is_directory(dir))
    nsf::fail(nsf::ErrorCode::io, "not a directory: " + dir.string());

  std::map<std::string, fs::path> irs, viss;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !has_image_extension(entry.path())) continue;
    const std::string stem = entry.path().stem().string();
    if (stem.size() > 3 && stem.ends_with("_ir"))
      irs.emplace(stem.substr(0, stem.size() - 3), entry.path());
    else if (stem.size() > 4 && stem.ends_with("_vis"))
      viss.emplace(stem.substr(0, stem.size() - 4), entry.path());
  }

  std::vector<BatchPair> pairs;
  for (const auto& [stem, path] : irs) {
    auto it = viss.find(stem);
    if (it == viss.end()) {
      std::cerr << "nsstfuse: warning: no visible partner for "
                << path.filename().string() << ", skipping\n";
      continue;
    }
    pairs.push_back({stem, path, it->second});
  }
  for (const auto& [stem, path] : viss)
    if (!irs.count(stem))
      std::cerr << "nsstfuse: warning: no infrared partner for "
                << path.filename().string() << ", skipping\n";

  if (pairs.empty())
    nsf::fail(nsf::ErrorCode::empty_batch,
              "no <stem>_ir/<stem>_vis pairs in " + dir.string());
  return pairs;  // std::map iteration already ordered the stems
}

int run_single(const nsf::RunConfig& cfg, const char** stage) {
  *stage = "loading inputs";
  const nsf::GrayImage ir = nsf::load_image(cfg.ir_path);
  const nsf::GrayImage vis = nsf::load_image(cfg.vis_path);
  nsf::check_pair(ir, vis);

  *stage = "fusing pair";
  const nsf::FusionResult result = nsf::fuse_images(ir, vis, cfg.fusion);

  *stage = "writing fused image";
  nsf::save_image(result.fused, cfg.out_path);

  if (!cfg.metrics_path.empty()) {
    *stage = "computing quality metrics";
    const auto r = nsf::metrics::report(ir, vis, result.fused);
    write_text_file(cfg.metrics_path, nsf::metrics::to_json(r) + "\n");
  }
  if (!cfg.diagnostics_dir.empty()) {
    *stage = "writing diagnostics";
    write_pair_diagnostics(result, cfg.fusion, ir, vis, cfg.diagnostics_dir);
  }
  return 0;
}

int run_batch(const nsf::RunConfig& cfg, const char** stage) {
  *stage = "scanning batch directory";
  const std::vector<BatchPair> pairs = discover_pairs(cfg.batch_dir);
  fs::create_directories(cfg.out_dir);

  *stage = "fusing batch";
  std::vector<nsf::metrics::MetricsReport> rows(pairs.size());
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < pairs.size();
         i = next.fetch_add(1)) {
      try {
        const BatchPair& p = pairs[i];
        const nsf::GrayImage ir = nsf::load_image(p.ir.string());
        const nsf::GrayImage vis = nsf::load_image(p.vis.string());
        nsf::check_pair(ir, vis);
        const nsf::FusionResult result = nsf::fuse_images(ir, vis, cfg.fusion);
        const fs::path out =
            fs::path(cfg.out_dir) / (p.stem + "_fused" + p.ir.extension().string());
        nsf::save_image(result.fused, out.string());
        rows[i] = nsf::metrics::report(ir, vis, result.fused);
        if (!cfg.diagnostics_dir.empty())
          write_pair_diagnostics(result, cfg.fusion, ir, vis,
                                 fs::path(cfg.diagnostics_dir) / p.stem);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(pairs.size());  // stop handing out work
      }
    }
  };

  const size_t n_workers =
      std::min<size_t>(size_t(std::max(1, cfg.jobs)), pairs.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  *stage = "writing batch report";
  std::string csv = std::string(kCsvHeader) + "\n";
  nsf::metrics::MetricsReport mean;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& r = rows[i];
    csv += csv_row(pairs[i].stem, r) + "\n";
    mean.qabf += r.qabf;
    mean.scd += r.scd;
    mean.ms_ssim += r.ms_ssim;
    mean.ag += r.ag;
    mean.ei += r.ei;
    mean.q += r.q;
    mean.qw += r.qw;
    mean.qe += r.qe;
    mean.sf += r.sf;
  }
  const double inv = 1.0 / double(pairs.size());
  mean.qabf *= inv;
  mean.scd *= inv;
  mean.ms_ssim *= inv;
  mean.ag *= inv;
  mean.ei *= inv;
  mean.q *= inv;
  mean.qw *= inv;
  mean.qe *= inv;
  mean.sf *= inv;
  csv += csv_row("MEAN", mean) + "\n";

  const fs::path csv_path = cfg.metrics_path.empty()
                                ? fs::path(cfg.out_dir) / "metrics.csv"
                                : fs::path(cfg.metrics_path);
  write_text_file(csv_path, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Infrared/visible image fusion in the non-subsampled shearlet domain.\n"
      "Single pair:  nsstfuse --ir a.png --vis b.png --out f.png\n"
      "Batch:        nsstfuse --batch-dir in/ --out-dir out/\n"
      "Batch inputs pair <stem>_ir.{png,pgm} with <stem>_vis.{png,pgm};\n"
      "per-pair metrics and a MEAN row are written as CSV."};

  std::string ir_path, vis_path, out_path, batch_dir, out_dir, config_path;
  std::string metrics_path, diagnostics_dir;
  int states = 0, levels = 0, low_window = 0, jobs = 0;
  double alpha = 0.0;
  std::vector<int> dirs, window_radius;

  app.add_option("--ir", ir_path, "Infrared input image (PNG or PGM)");
  app.add_option("--vis", vis_path, "Visible input image (PNG or PGM)");
  app.add_option("--out", out_path, "Fused output image path");
  app.add_option("--batch-dir", batch_dir, "Directory of paired input images");
  app.add_option("--out-dir", out_dir, "Output directory for batch mode");
  app.add_option("--config", config_path, "JSON configuration file");
  auto* opt_states =
      app.add_option("--states", states, "Hidden-state count per coefficient");
  auto* opt_alpha =
      app.add_option("--alpha", alpha, "Saliency/context blend in [0,1]");
  auto* opt_levels =
      app.add_option("--levels", levels, "Pyramid decomposition levels");
  auto* opt_dirs = app.add_option("--dirs", dirs,
                                  "Directions per scale, coarse to fine")
                       ->delimiter(',');
  auto* opt_low =
      app.add_option("--low-window", low_window, "Low-band energy window (odd)");
  auto* opt_radius = app.add_option("--window-radius", window_radius,
                                    "Local EM window radius per scale")
                         ->delimiter(',');
  app.add_option("--metrics", metrics_path,
                 "Metrics output (JSON for single pair, CSV path for batch)");
  app.add_option("--diagnostics-dir", diagnostics_dir,
                 "Directory for saliency/context maps and subband dumps");
  auto* opt_jobs = app.add_option("--jobs", jobs, "Concurrent batch pairs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const char* stage = "loading configuration";
  try {
    nsf::RunConfig cfg =
        config_path.empty() ? nsf::default_run_config() : nsf::load_config(config_path);

    // Flags override whatever the config file set.
    if (*opt_states) cfg.fusion.mchmm.num_states = states;
    if (*opt_alpha) cfg.fusion.alpha = alpha;
    if (*opt_levels) cfg.fusion.decomposition.levels = levels;
    if (*opt_dirs) cfg.fusion.decomposition.directions_per_scale = dirs;
    if (*opt_low) cfg.fusion.low_window = low_window;
    if (*opt_radius) cfg.fusion.mchmm.window_radius = window_radius;
    if (*opt_jobs) cfg.jobs = jobs;
    cfg.ir_path = ir_path;
    cfg.vis_path = vis_path;
    cfg.out_path = out_path;
    cfg.batch_dir = batch_dir;
    cfg.out_dir = out_dir;
    cfg.metrics_path = metrics_path;
    cfg.diagnostics_dir = diagnostics_dir;

    stage = "validating configuration";
    if (cfg.fusion.alpha < 0.0 || cfg.fusion.alpha > 1.0)
      nsf::fail(nsf::ErrorCode::bad_config, "alpha out of range");
    if (cfg.fusion.mchmm.num_states < 2 || cfg.fusion.mchmm.num_states > 16)
      nsf::fail(nsf::ErrorCode::bad_config, "states out of range");
    if (cfg.jobs < 1) nsf::fail(nsf::ErrorCode::bad_config, "jobs out of range");
    cfg.fusion.validate();

    const bool single = !ir_path.empty() || !vis_path.empty() || !out_path.empty();
    const bool batch = !batch_dir.empty() || !out_dir.empty();
    if (single == batch)
      nsf::fail(nsf::ErrorCode::io,
                "choose one mode: --ir/--vis/--out or --batch-dir/--out-dir");
    if (single && (ir_path.empty() || vis_path.empty() || out_path.empty()))
      nsf::fail(nsf::ErrorCode::io, "single mode needs --ir, --vis and --out");
    if (batch && (batch_dir.empty() || out_dir.empty()))
      nsf::fail(nsf::ErrorCode::io, "batch mode needs --batch-dir and --out-dir");

    return single ? run_single(cfg, &stage) : run_batch(cfg, &stage);
  } catch (const nsf::Error& e) {
    std::cerr << "nsstfuse: " << stage << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "nsstfuse: " << stage << ": unexpected error: " << e.what()
              << "\n";
    return 5;
  }
}
