#include "flim/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "flim/decoder.hpp"
#include "flim/encoder.hpp"
#include "flim/error.hpp"
#include "flim/metrics.hpp"
#include "flim/model_io.hpp"
#include "flim/png_io.hpp"
#include "flim/postprocess.hpp"
#include "flim/service.hpp"
#include "flim/simplify.hpp"

namespace flim::cli {

namespace {

namespace fs = std::filesystem;

struct TrainingSet {
  std::vector<std::string> names;
  std::vector<Image> images;
  std::vector<MarkerSet> markers;
};

// Images are paired with the marker PNG of the same file name. Images without
// markers are skipped; markers without an image are an error.
TrainingSet load_training_set(const fs::path& image_dir, const fs::path& marker_dir) {
  TrainingSet set;
  const auto images = list_pngs(image_dir);
  for (const fs::path& m : list_pngs(marker_dir)) {
    require(fs::exists(image_dir / m.filename()), ErrorCode::io,
            "marker file " + m.filename().string() + " has no matching image");
  }
  for (const fs::path& img_path : images) {
    const std::string name = img_path.filename().string();
    const fs::path marker_path = marker_dir / name;
    if (!fs::exists(marker_path)) {
      spdlog::warn("{}: no markers, not used for training", name);
      continue;
    }
    Image img = decode_png(read_file(img_path));
    MarkerSet ms = markers_from_raster(decode_label_png(read_file(marker_path)), name);
    require(ms.height == img.height() && ms.width == img.width(), ErrorCode::shape_mismatch,
            name + ": marker raster size does not match the image");
    validate_markers(ms);
    set.names.push_back(name);
    set.images.push_back(std::move(img));
    set.markers.push_back(std::move(ms));
  }
  require(!set.images.empty(), ErrorCode::no_marker_pixels, "no image with markers found");
  return set;
}

ArchitectureSpec load_architecture(const std::string& what) {
  if (!fs::exists(what)) {
    if (what == "schistosoma") return presets::schistosoma();
    if (what == "brain_tumor") return presets::brain_tumor();
  }
  const Bytes b = read_file(what);
  return parse_architecture(std::string(b.begin(), b.end()));
}

// A broken model file is bad input, not a broken engine.
Model load_model_arg(const std::string& path) {
  try {
    return load_model(path);
  } catch (const Error& e) {
    fail(ErrorCode::io, path + ": " + e.what() + " (" + std::string(to_string(e.code())) + ")");
  }
}

void print_model_summary(std::ostream& out, const Model& model, int height, int width) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    out << "layer " << (l + 1) << ": " << model.layers[l].out_channels() << " kernels"
        << (model.layers[l].separable ? " (separable)" : "") << '\n';
  }
  out << "params: " << count_params(model.layers) << '\n';
  out << "flops: " << count_flops(model.layers, height, width) << " (" << height << "x" << width
      << ")\n";
}

struct TrainArgs {
  std::string arch, images, markers, out;
  std::uint64_t seed = 0;
  bool separable = false;
  int simplify_each_layer = 0;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  ArchitectureSpec arch = load_architecture(a.arch);
  if (a.separable) {
    for (LayerSpec& l : arch.layers) l.mode = ConvMode::separable;
  }
  const TrainingSet set = load_training_set(a.images, a.markers);
  TrainOptions options;
  options.seed = a.seed;
  options.layer.simplify_iterations = a.simplify_each_layer;
  const Model model = train_encoder(set.images, set.markers, arch, options, set.names);
  save_model(model, a.out);
  print_model_summary(out, model, set.images.front().height(), set.images.front().width());
  return ok;
}

struct InferArgs {
  std::string model, images, out;
  std::optional<int> layer;
  std::optional<std::size_t> min_area, max_area;
  bool delineate = false;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const Model model = load_model_arg(a.model);
  std::optional<std::size_t> layer;
  if (a.layer) {
    require(*a.layer >= 1 && static_cast<std::size_t>(*a.layer) <= model.layers.size(),
            ErrorCode::out_of_bounds,
            "--layer must be in [1, " + std::to_string(model.layers.size()) + "]");
    layer = static_cast<std::size_t>(*a.layer - 1);
  }
  PostprocessOptions post;
  post.size_filter = a.min_area || a.max_area;
  post.min_area = a.min_area.value_or(post.min_area);
  post.max_area = a.max_area.value_or(post.max_area);
  post.delineate = a.delineate;

  fs::create_directories(a.out);
  const auto paths = list_pngs(a.images);
  require(!paths.empty(), ErrorCode::io, "no PNG images in " + a.images);
  for (const fs::path& p : paths) {
    const Image img = decode_png(read_file(p));
    require(img.channels() == model.arch.input_channels, ErrorCode::shape_mismatch,
            p.filename().string() + ": image channels do not match the model");
    const SaliencyResult s = saliency(model, img, layer);
    const Image result = postprocess(img, s.map, post);
    write_file(fs::path(a.out) / p.filename(), encode_gray_png(result));
    out << p.filename().string() << '\n';
  }
  return ok;
}

struct SimplifyArgs {
  std::string model, images, markers, out, report;
  int layer = 0;
  int n = 1;
};

int cmd_simplify(const SimplifyArgs& a, std::ostream& out) {
  const Model model = load_model_arg(a.model);
  require(a.layer >= 1 && static_cast<std::size_t>(a.layer) <= model.layers.size(),
          ErrorCode::out_of_bounds,
          "--layer must be in [1, " + std::to_string(model.layers.size()) + "]");
  const TrainingSet set = load_training_set(a.images, a.markers);
  TrainOptions options;
  options.seed = model.seed;
  const RetrainContext context{set.images, set.markers, options};
  const NetworkSimplifyResult r =
      simplify_network(model, static_cast<std::size_t>(a.layer - 1), a.n, &context);
  save_model(r.model, a.out);

  const int h = set.images.front().height(), w = set.images.front().width();
  nlohmann::json report = nlohmann::json::parse(r.report.to_json());
  report["layer"] = a.layer;
  report["params_before"] = count_params(model.layers);
  report["params_after"] = count_params(r.model.layers);
  report["flops_before"] = count_flops(model.layers, h, w);
  report["flops_after"] = count_flops(r.model.layers, h, w);
  const std::string text = report.dump(2);
  if (!a.report.empty()) {
    write_file(a.report, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
  out << text << '\n';
  return ok;
}

struct EvalArgs {
  std::string saliency, gt, baseline, report, model;
  double alpha = 0.05;
};

std::vector<ImageScore> score_dir(const fs::path& sal_dir, const fs::path& gt_dir) {
  std::vector<ImageScore> scores;
  const auto paths = list_pngs(sal_dir);
  require(!paths.empty(), ErrorCode::io, "no PNG saliency maps in " + sal_dir.string());
  for (const fs::path& p : paths) {
    const std::string name = p.filename().string();
    const fs::path gt_path = gt_dir / name;
    require(fs::exists(gt_path), ErrorCode::io, name + ": no ground truth");
    const Image sal = decode_png(read_file(p)).channel(0);
    const Image gt = decode_mask_png(read_file(gt_path));
    scores.push_back(score_image(name, sal, gt));
  }
  return scores;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  MetricReport report = summarize(score_dir(a.saliency, a.gt));
  if (!a.model.empty()) {
    const Model model = load_model_arg(a.model);
    const Image first = decode_png(read_file(fs::path(a.gt) / report.per_image.front().name));
    report.params = count_params(model.layers);
    report.gflops = static_cast<double>(count_flops(model.layers, first.height(), first.width())) / 1e9;
  }
  if (!a.baseline.empty()) compare_with(report, score_dir(a.baseline, a.gt), a.alpha);
  const std::string json = report.to_json();
  write_file(a.report, std::span(reinterpret_cast<const std::uint8_t*>(json.data()), json.size()));
  out << report.to_table();
  return ok;
}

struct ServeArgs {
  std::string root, host = "127.0.0.1";
  int port = 8080;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  StudioServer server(a.root);
  const int port = server.bind(a.host, a.port);
  require(port > 0, ErrorCode::io, "cannot bind " + a.host + ":" + std::to_string(a.port));
  out << "listening on http://" << a.host << ':' << port << std::endl;
  server.run();
  return ok;
}

void setup_logging(bool verbose) {
  auto logger = spdlog::get("flim");
  if (!logger) {
    logger = spdlog::stderr_color_mt("flim");
    spdlog::set_default_logger(logger);
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Marker-driven encoder training, simplification, inference and evaluation", "flim"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Learn an encoder from images and markers");
  t->add_option("--arch", train.arch, "Architecture JSON file, or a preset name")->required();
  t->add_option("--images", train.images, "Image directory")->required()->check(CLI::ExistingDirectory);
  t->add_option("--markers", train.markers, "Marker directory")->required()->check(CLI::ExistingDirectory);
  t->add_option("--out", train.out, "Output model file")->required();
  t->add_option("--seed", train.seed, "Random seed")->required();
  t->add_flag("--separable", train.separable, "Factorize every layer");
  t->add_option("--simplify-each-layer", train.simplify_each_layer, "Simplification passes per layer")
      ->check(CLI::NonNegativeNumber);

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "Write saliency maps");
  i->add_option("--model", infer.model, "Model file")->required()->check(CLI::ExistingFile);
  i->add_option("--images", infer.images, "Image directory")->required()->check(CLI::ExistingDirectory);
  i->add_option("--out", infer.out, "Output directory")->required();
  i->add_option("--layer", infer.layer, "Decode after this layer (1-based, default last)");
  i->add_option("--min-area", infer.min_area, "Drop components smaller than this (px)");
  i->add_option("--max-area", infer.max_area, "Drop components larger than this (px)");
  i->add_flag("--delineate", infer.delineate, "Refine with seeded delineation");

  SimplifyArgs simp;
  auto* s = app.add_subcommand("simplify", "Remove redundant kernels of one layer");
  s->add_option("--model", simp.model, "Model file")->required()->check(CLI::ExistingFile);
  s->add_option("--images", simp.images, "Training image directory")->required()->check(CLI::ExistingDirectory);
  s->add_option("--markers", simp.markers, "Training marker directory")->required()->check(CLI::ExistingDirectory);
  s->add_option("--layer", simp.layer, "Layer to simplify (1-based)")->required();
  s->add_option("--n", simp.n, "Simplification passes")->required()->check(CLI::PositiveNumber);
  s->add_option("--out", simp.out, "Output model file")->required();
  s->add_option("--report", simp.report, "Also write the JSON report here");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score saliency maps against ground truth");
  e->add_option("--saliency", eval.saliency, "Saliency directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--gt", eval.gt, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--baseline", eval.baseline, "Second saliency directory to test against")
      ->check(CLI::ExistingDirectory);
  e->add_option("--alpha", eval.alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  e->add_option("--report", eval.report, "JSON report path")->required();
  e->add_option("--model", eval.model, "Model whose size fills the #Params and FLOPs columns")
      ->check(CLI::ExistingFile);

  ServeArgs serve;
  auto* v = app.add_subcommand("serve", "Run the marker studio HTTP service");
  v->add_option("--root", serve.root, "Project directory")->required();
  v->add_option("--port", serve.port, "TCP port (0 picks one)");
  v->add_option("--host", serve.host, "Bind address");

  std::vector<const char*> args;
  for (const std::string& a : argv) args.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(args.size()), args.data());
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? ok : usage;
  }

  setup_logging(verbose);
  try {
    if (*t) return cmd_train(train, out);
    if (*i) return cmd_infer(infer, out);
    if (*s) return cmd_simplify(simp, out);
    if (*e) return cmd_eval(eval, out);
    if (*v) return cmd_serve(serve, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return ex.code() == ErrorCode::invariant_violation ? internal_error : data_error;
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << '\n';
    return internal_error;
  }
  return usage;
}

}  // namespace flim::cli
