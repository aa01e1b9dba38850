#include "semap/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <limits>
#include <sstream>

#include <spdlog/spdlog.h>

#include "semap/eval.hpp"
#include "semap/pipeline.hpp"
#include "semap/random.hpp"
#include "semap/sim.hpp"

namespace semap {

namespace fs = std::filesystem;

namespace {

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw DataError("missing file " + p.string());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
  if (!out) throw DataError("write failed for " + p.string());
}

Json read_config(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw ConfigError("config file not found: " + p.string());
  try {
    return read_json(p);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string scene;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void cmd_simulate(const SimulateArgs& a) {
  SceneSpec spec = scene_spec_from_json(read_config(a.scene));
  if (a.seed) spec.seed = *a.seed;
  if (!spec.database.empty() && spec.database != "builtin" && fs::path(spec.database).is_relative()) {
    spec.database = (fs::path(a.scene).parent_path() / spec.database).string();
  }
  const ShapeDatabase db = load_database(spec.database);
  try {
    spec.validate(db);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  const Sequence seq = generate(spec, db);
  write_sequence(seq, db, a.out);
  for (const auto& o : spec.objects) {
    spdlog::info("object {}: mean occlusion fraction {:.3f}", o.id, seq.mean_occlusion(o.id));
  }
  spdlog::info("wrote {} frames to {}", seq.frames.size(), a.out);
}

// --- filter -----------------------------------------------------------------

struct FilterArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
};

void cmd_filter(const FilterArgs& a) {
  const Json cfg = read_config(a.config);
  reject_unknown_keys(cfg, {"version", "database", "sequence", "output", "seed", "intrinsics", "detector", "filter"},
                      "config");
  if (!cfg.contains("version") || cfg.at("version") != 1) throw ConfigError("config: unsupported or missing version");
  for (const char* key : {"sequence", "output"}) {
    if (!cfg.contains(key) || !cfg.at(key).is_string()) throw ConfigError(std::string("config.") + key + ": expected a path");
  }
  const fs::path base = fs::path(a.config).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_relative() ? base / p : fs::path(p); };
  const fs::path seq_dir = resolve(cfg.at("sequence").get<std::string>());
  const fs::path out_dir = resolve(cfg.at("output").get<std::string>());

  FilterConfig fc = cfg.contains("filter") ? filter_config_from_json(cfg.at("filter")) : FilterConfig{};
  if (cfg.contains("seed")) {
    if (!cfg.at("seed").is_number_unsigned()) throw ConfigError("config.seed: expected an unsigned integer");
    fc.seed = cfg.at("seed").get<std::uint64_t>();
  }
  if (a.seed) fc.seed = *a.seed;
  const std::string detector = cfg.value("detector", std::string("oracle"));
  if (detector != "oracle" && detector != "none") throw ConfigError("config.detector: expected 'oracle' or 'none'");

  if (!fs::is_directory(seq_dir)) throw ConfigError("sequence directory not found: " + seq_dir.string());
  for (const char* f : {"manifest.json", "trajectory.txt", "proposals.jsonl"}) require_file(seq_dir / f);
  const SequenceManifest manifest = read_manifest(seq_dir / "manifest.json");
  std::string db_ref = cfg.contains("database") ? cfg.at("database").get<std::string>() : manifest.database;
  if (db_ref != "builtin" && cfg.contains("database")) db_ref = resolve(db_ref).string();
  const ShapeDatabase db = load_database(db_ref);
  const CameraIntrinsics k = cfg.contains("intrinsics") ? intrinsics_from_json(cfg.at("intrinsics")) : manifest.intrinsics;
  if (k.width != manifest.intrinsics.width || k.height != manifest.intrinsics.height) {
    throw ConfigError("config.intrinsics: image size differs from the sequence");
  }
  const auto frames = load_observations(seq_dir, manifest);

  const OracleDetector oracle(oracle_references(manifest));
  const SemanticFilter filter(db, k, fc, detector == "oracle" ? &oracle : nullptr);

  // Everything is validated and loaded; only now touch the output directory.
  std::ostringstream dump;
  const FilterRun run = run_filter(filter, frames, db, &dump);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());
  write_text(out_dir / "states.jsonl", dump.str());
  Json summary = world_summary(run);
  summary["seed"] = fc.seed;
  summary["filter"] = filter_config_to_json(fc);
  write_json(out_dir / "summary.json", summary);
  spdlog::info("filtered {} frames, {} objects", run.world.frames, run.world.objects.size());
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string states;
  std::string manifest;
  std::string database;
  std::string out;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  bool no_align = false;
  int threads = 1;
};

void cmd_eval(const EvalArgs& a) {
  if (a.samples == 0) throw ConfigError("--samples must be positive");
  if (a.threads < 1) throw ConfigError("--threads must be >= 1");
  require_file(a.states);
  require_file(a.manifest);
  const SequenceManifest m = read_manifest(a.manifest);
  const ShapeDatabase db = load_database(a.database.empty() ? m.database : a.database);
  const auto frames = read_state_dump(a.states);

  SurfaceErrorOptions opts;
  opts.samples = a.samples;
  opts.seed = derive_seed(a.seed, {kStreamEval});
  opts.align = !a.no_align;
  opts.threads = a.threads;
  opts.icp.gravity = m.gravity;
  const EvalReport report = evaluate(frames, m.objects, db, opts);

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw DataError("cannot create " + a.out + ": " + ec.message());
  write_json(fs::path(a.out) / "metrics.json", eval_report_to_json(report));
  write_text(fs::path(a.out) / "metrics.csv", eval_report_to_csv(report));
  if (report.surface) {
    spdlog::info("surface error median {:.4f} m mean {:.4f} m", report.surface->median, report.surface->mean);
  }
}

// --- render -----------------------------------------------------------------

struct RenderArgs {
  std::string states;
  std::string sequence;
  std::string database;
  std::string out;
  int frame = 0;
};

void cmd_render(const RenderArgs& a) {
  require_file(a.states);
  const fs::path seq(a.sequence);
  require_file(seq / "manifest.json");
  const SequenceManifest m = read_manifest(seq / "manifest.json");
  if (a.frame < 0 || a.frame >= m.frames) {
    throw ConfigError("--frame " + std::to_string(a.frame) + " outside [0, " + std::to_string(m.frames) + ")");
  }
  const ShapeDatabase db = load_database(a.database.empty() ? m.database : a.database);
  const auto states = read_state_dump(a.states);
  const FrameEstimate* state = nullptr;
  for (const auto& s : states) {
    if (s.frame == a.frame) state = &s;
  }
  if (!state) throw DataError("state dump has no record for frame " + std::to_string(a.frame));
  const auto frames = load_observations(seq, m);
  write_ppm(a.out, render_overlay(*state, frames[static_cast<size_t>(a.frame)], db, m.intrinsics));
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const InvalidInput& e) {
    spdlog::error("invalid input: {}", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    spdlog::error("data error: {}", e.what());
    return kExitData;
  } catch (const ProviderError& e) {
    spdlog::error("detector error: {}", e.what());
    return kExitData;
  } catch (const NumericalError& e) {
    spdlog::error("numerical failure: {}", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
}

}  // namespace

Rgb8 render_overlay(const FrameEstimate& state, const FrameObservation& obs, const ShapeDatabase& db,
                    const CameraIntrinsics& k) {
  Rgb8 img(k.width, k.height);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const auto v = static_cast<std::uint8_t>(std::lround(255.0f * obs.edges(x, y)));
      img(x, y) = {v, v, v};
    }
  }

  std::vector<RenderObject> objects;
  std::map<int, double> depth;
  for (const auto& o : state.objects) {
    if (o.status == TrackStatus::lost) continue;
    if (!db.contains(o.shape)) throw DataError("state references unknown shape " + std::to_string(o.shape));
    const RigidTransform rel = relative_object_in_camera(o.inertial, obs.camera);
    objects.push_back({o.id, &db.shape(o.shape).mesh, rel});
    depth[o.id] = rel.translation.z();
  }
  const RenderBuffers buf = render_scene(objects, k);
  double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
  for (const auto& [id, d] : depth) {
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  std::map<int, std::uint8_t> shade;
  for (const auto& [id, d] : depth) {
    const double s = dmax > dmin ? (d - dmin) / (dmax - dmin) : 0.5;
    shade[id] = static_cast<std::uint8_t>(std::lround(60.0 + 150.0 * s));
  }
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const int id = buf.instance(x, y);
      if (id <= 0) continue;
      const std::uint8_t s = shade.at(id);
      img(x, y) = buf.contour(x, y) ? std::array<std::uint8_t, 3>{0, 255, 0} : std::array<std::uint8_t, 3>{s, s, s};
    }
  }

  auto plot = [&](int x, int y) {
    if (img.contains(x, y)) img(x, y) = {255, 0, 0};
  };
  for (const auto& p : obs.proposals) {
    const int x0 = static_cast<int>(std::floor(p.box.x0)), x1 = static_cast<int>(std::ceil(p.box.x1)) - 1;
    const int y0 = static_cast<int>(std::floor(p.box.y0)), y1 = static_cast<int>(std::ceil(p.box.y1)) - 1;
    for (int x = x0; x <= x1; ++x) {
      plot(x, y0);
      plot(x, y1);
    }
    for (int y = y0; y <= y1; ++y) {
      plot(x0, y);
      plot(x1, y);
    }
  }
  return img;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Object-level semantic mapping: simulate, filter, evaluate, render"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic sequence from a scene spec");
  simulate->add_option("--scene", sim.scene, "Scene spec JSON")->required();
  simulate->add_option("--out", sim.out, "Output sequence directory")->required();
  simulate->add_option("--seed", sim.seed, "Override the master seed");

  FilterArgs flt;
  auto* filter = app.add_subcommand("filter", "Run the semantic filter over a sequence");
  filter->add_option("--config", flt.config, "Run config JSON")->required();
  filter->add_option("--seed", flt.seed, "Override the filter seed");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score a state dump against ground truth");
  eval->add_option("--states", ev.states, "states.jsonl from the filter")->required();
  eval->add_option("--manifest", ev.manifest, "Sequence manifest.json")->required();
  eval->add_option("--database", ev.database, "Shape database manifest (default: the sequence's)");
  eval->add_option("--out", ev.out, "Output directory for metrics.json and metrics.csv")->required();
  eval->add_option("--samples", ev.samples, "Surface samples")->capture_default_str();
  eval->add_option("--seed", ev.seed, "Sampling seed")->capture_default_str();
  eval->add_flag("--no-align", ev.no_align, "Skip ICP alignment");
  eval->add_option("--threads", ev.threads, "Worker threads for distance queries")->capture_default_str();

  RenderArgs rd;
  auto* render = app.add_subcommand("render", "Write a debug overlay for one frame");
  render->add_option("--states", rd.states, "states.jsonl from the filter")->required();
  render->add_option("--sequence", rd.sequence, "Sequence directory")->required();
  render->add_option("--frame", rd.frame, "Frame index")->required();
  render->add_option("--database", rd.database, "Shape database manifest (default: the sequence's)");
  render->add_option("--out", rd.out, "Output P6 image")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);
  if (quiet) spdlog::set_level(spdlog::level::warn);

  if (*simulate) return guarded([&] { cmd_simulate(sim); });
  if (*filter) return guarded([&] { cmd_filter(flt); });
  if (*eval) return guarded([&] { cmd_eval(ev); });
  return guarded([&] { cmd_render(rd); });
}

}  // namespace semap
