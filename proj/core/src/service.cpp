#include "flim/service.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <shared_mutex>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "flim/decoder.hpp"
#include "flim/encoder.hpp"
#include "flim/error.hpp"
#include "flim/markers.hpp"
#include "flim/model_io.hpp"
#include "flim/png_io.hpp"

namespace flim {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum class LayerStatus { untrained, trained, stale };

const char* status_name(LayerStatus s) {
  switch (s) {
    case LayerStatus::trained: return "trained";
    case LayerStatus::stale: return "stale";
    case LayerStatus::untrained: break;
  }
  return "untrained";
}

// Thrown inside handlers and turned into a JSON error response.
struct HttpError {
  int status;
  std::string message;
};

[[noreturn]] void http_fail(int status, std::string message) {
  throw HttpError{status, std::move(message)};
}

struct Project {
  std::string id;
  fs::path dir;
  std::map<std::string, Image> images;  // keyed by file name, ordered
  std::map<std::string, MarkerSet> markers;
  std::optional<ArchitectureSpec> arch;
  std::vector<std::optional<TrainedLayer>> layers;  // weights kept while stale
  std::vector<LayerStatus> status;
  std::vector<std::uint64_t> seeds;
  std::vector<int> simplify;
  mutable std::shared_mutex mutex;

  void mark_stale_from(std::size_t first) {
    for (std::size_t l = first; l < status.size(); ++l) {
      if (status[l] == LayerStatus::trained) status[l] = LayerStatus::stale;
    }
  }

  std::size_t trained_prefix() const {
    std::size_t n = 0;
    while (n < status.size() && status[n] == LayerStatus::trained) ++n;
    return n;
  }

  // Model made of the first `n` layers, all of which must be trained.
  Model prefix_model(std::size_t n) const {
    Model m;
    m.arch = *arch;
    m.arch.layers.resize(n);
    for (std::size_t l = 0; l < n; ++l) m.layers.push_back(*layers[l]);
    m.seed = seeds.empty() ? 0 : seeds.front();
    m.provenance = marked_names();
    return m;
  }

  std::vector<std::string> marked_names() const {
    std::vector<std::string> names;
    for (const auto& [name, ms] : markers) {
      if (images.count(name)) names.push_back(name);
    }
    return names;
  }

  json summary() const {
    json imgs = json::array();
    for (const auto& [name, img] : images) {
      imgs.push_back({{"name", name},
                      {"height", img.height()},
                      {"width", img.width()},
                      {"channels", img.channels()},
                      {"has_markers", markers.count(name) > 0}});
    }
    json layers_json = json::array();
    for (std::size_t l = 0; l < status.size(); ++l) {
      json e{{"layer", l + 1}, {"status", status_name(status[l])}};
      if (layers[l]) e["n_kernels"] = layers[l]->out_channels();
      layers_json.push_back(e);
    }
    json j{{"id", id}, {"images", imgs}, {"layers", layers_json}};
    j["arch"] = arch ? json::parse(architecture_to_json(*arch)) : json(nullptr);
    return j;
  }

  void save_state() const {
    json s{{"status", json::array()}, {"seeds", seeds}, {"simplify", simplify}};
    for (LayerStatus st : status) s["status"].push_back(status_name(st));
    const std::string text = s.dump(2);
    write_file(dir / "state.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    const std::size_t n = trained_prefix();
    std::error_code ec;
    if (n == 0) {
      fs::remove(dir / "model.flim", ec);
    } else {
      save_model(prefix_model(n), dir / "model.flim");
    }
  }

  void save_arch() const {
    const std::string text = architecture_to_json(*arch);
    write_file(dir / "arch.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
};

std::string read_text(const fs::path& p) {
  const Bytes b = read_file(p);
  return {b.begin(), b.end()};
}

bool valid_image_name(const std::string& name) {
  static const std::regex pattern(R"([A-Za-z0-9_][A-Za-z0-9._-]*\.png)");
  return std::regex_match(name, pattern);
}

std::span<const std::uint8_t> body_bytes(const httplib::Request& req) {
  return {reinterpret_cast<const std::uint8_t*>(req.body.data()), req.body.size()};
}

void send_json(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_png(httplib::Response& res, const Bytes& png) {
  res.status = 200;
  res.set_content(std::string(png.begin(), png.end()), "image/png");
}

int parse_int(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  http_fail(400, std::string("invalid ") + what + " '" + text + "'");
}

}  // namespace

struct StudioServer::Impl {
  fs::path root;
  httplib::Server http;
  std::mutex registry_mutex;
  std::map<std::string, std::shared_ptr<Project>> projects;
  int next_id = 1;

  explicit Impl(fs::path r) : root(std::move(r)) {
    fs::create_directories(root);
    load_existing();
    routes();
  }

  // ---- persistence ----

  void load_existing() {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const fs::path& d : dirs) {
      const std::string id = d.filename().string();
      if (id.size() < 2 || id[0] != 'p') continue;
      try {
        next_id = std::max(next_id, std::stoi(id.substr(1)) + 1);
        projects[id] = load_project(id, d);
      } catch (const std::exception& e) {
        spdlog::warn("skipping project directory {}: {}", d.string(), e.what());
      }
    }
  }

  static std::shared_ptr<Project> load_project(const std::string& id, const fs::path& d) {
    auto p = std::make_shared<Project>();
    p->id = id;
    p->dir = d;
    if (fs::is_directory(d / "images")) {
      for (const fs::path& f : list_pngs(d / "images")) {
        p->images[f.filename().string()] = decode_png(read_file(f));
      }
    }
    if (fs::is_directory(d / "markers")) {
      for (const fs::path& f : list_pngs(d / "markers")) {
        const std::string name = f.filename().string();
        p->markers[name] = markers_from_raster(decode_label_png(read_file(f)), name);
      }
    }
    if (fs::exists(d / "arch.json")) {
      p->arch = parse_architecture(read_text(d / "arch.json"));
      const std::size_t n = p->arch->layers.size();
      p->layers.assign(n, std::nullopt);
      p->status.assign(n, LayerStatus::untrained);
      p->seeds.assign(n, 0);
      p->simplify.assign(n, 0);
    }
    if (p->arch && fs::exists(d / "model.flim")) {
      const Model m = load_model(d / "model.flim");
      for (std::size_t l = 0; l < m.layers.size() && l < p->layers.size(); ++l) {
        p->layers[l] = m.layers[l];
        p->status[l] = LayerStatus::trained;
      }
    }
    if (p->arch && fs::exists(d / "state.json")) {
      const json s = json::parse(read_text(d / "state.json"));
      const auto seeds = s.value("seeds", std::vector<std::uint64_t>{});
      const auto simp = s.value("simplify", std::vector<int>{});
      for (std::size_t l = 0; l < p->seeds.size(); ++l) {
        if (l < seeds.size()) p->seeds[l] = seeds[l];
        if (l < simp.size()) p->simplify[l] = simp[l];
      }
    }
    return p;
  }

  std::shared_ptr<Project> find(const std::string& id) {
    std::lock_guard lock(registry_mutex);
    const auto it = projects.find(id);
    if (it == projects.end()) http_fail(404, "unknown project '" + id + "'");
    return it->second;
  }

  // ---- handlers ----

  void create_project(httplib::Response& res) {
    auto p = std::make_shared<Project>();
    {
      std::lock_guard lock(registry_mutex);
      p->id = "p" + std::to_string(next_id++);
      p->dir = root / p->id;
      fs::create_directories(p->dir / "images");
      fs::create_directories(p->dir / "markers");
      projects[p->id] = p;
    }
    send_json(res, p->summary(), 201);
  }

  void upload_image(Project& p, const httplib::Request& req, httplib::Response& res) {
    std::string name = req.has_param("name") ? req.get_param_value("name")
                                             : "image" + std::to_string(p.images.size() + 1) + ".png";
    if (name.size() < 4 || name.substr(name.size() - 4) != ".png") name += ".png";
    if (!valid_image_name(name)) http_fail(422, "invalid image name '" + name + "'");
    Image img;
    try {
      img = decode_png(body_bytes(req));
    } catch (const Error& e) {
      http_fail(422, e.what());
    }
    std::unique_lock lock(p.mutex);
    const auto old = p.images.find(name);
    if (old != p.images.end() && p.markers.count(name)) {
      // Same name, new pixels: drop markers that no longer fit and retire layers.
      if (old->second.height() != img.height() || old->second.width() != img.width()) {
        p.markers.erase(name);
        std::error_code ec;
        fs::remove(p.dir / "markers" / name, ec);
      }
      p.mark_stale_from(0);
    }
    write_file(p.dir / "images" / name, body_bytes(req));
    p.images[name] = std::move(img);
    if (p.arch) p.save_state();
    send_json(res, p.summary(), 201);
  }

  void put_markers(Project& p, const std::string& name, const httplib::Request& req,
                   httplib::Response& res) {
    std::unique_lock lock(p.mutex);
    const auto it = p.images.find(name);
    if (it == p.images.end()) http_fail(404, "unknown image '" + name + "'");
    MarkerSet ms;
    try {
      const LabelRaster raster = decode_label_png(body_bytes(req));
      if (raster.height != it->second.height() || raster.width != it->second.width()) {
        http_fail(422, "marker raster size does not match the image");
      }
      ms = markers_from_raster(raster, name);
      validate_markers(ms);
    } catch (const Error& e) {
      http_fail(422, e.what());
    }
    std::error_code ec;
    if (ms.markers.empty()) {
      p.markers.erase(name);
      fs::remove(p.dir / "markers" / name, ec);
    } else {
      write_file(p.dir / "markers" / name, encode_label_png(markers_to_raster(ms)));
      p.markers[name] = std::move(ms);
    }
    p.mark_stale_from(0);
    if (p.arch) p.save_state();
    send_json(res, p.summary());
  }

  void get_markers(const Project& p, const std::string& name, httplib::Response& res) {
    std::shared_lock lock(p.mutex);
    const auto img = p.images.find(name);
    if (img == p.images.end()) http_fail(404, "unknown image '" + name + "'");
    const auto it = p.markers.find(name);
    if (it != p.markers.end()) {
      send_png(res, encode_label_png(markers_to_raster(it->second)));
      return;
    }
    LabelRaster empty{img->second.height(), img->second.width(), {}};
    empty.values.assign(img->second.pixel_count(), 0);
    send_png(res, encode_label_png(empty));
  }

  void put_arch(Project& p, const httplib::Request& req, httplib::Response& res) {
    ArchitectureSpec arch;
    try {
      arch = parse_architecture(req.body);
    } catch (const Error& e) {
      http_fail(422, e.what());
    }
    std::unique_lock lock(p.mutex);
    std::size_t first_diff = 0;
    if (p.arch && p.arch->input_channels == arch.input_channels) {
      while (first_diff < arch.layers.size() && first_diff < p.arch->layers.size() &&
             arch.layers[first_diff] == p.arch->layers[first_diff]) {
        ++first_diff;
      }
    }
    const std::size_t n = arch.layers.size();
    p.layers.resize(n);
    p.status.resize(n, LayerStatus::untrained);
    p.seeds.resize(n, 0);
    p.simplify.resize(n, 0);
    p.mark_stale_from(first_diff);
    for (std::size_t l = first_diff; l < n; ++l) {
      // weights of a layer whose own shape changed cannot be reused
      if (!p.arch || l >= p.arch->layers.size() || !(arch.layers[l] == p.arch->layers[l]) ||
          p.arch->input_channels != arch.input_channels) {
        p.status[l] = LayerStatus::untrained;
        p.layers[l].reset();
      }
    }
    p.arch = std::move(arch);
    p.save_arch();
    p.save_state();
    send_json(res, p.summary());
  }

  void train(Project& p, int layer_number, const httplib::Request& req, httplib::Response& res) {
    json body = json::object();
    if (!req.body.empty()) {
      try {
        body = json::parse(req.body);
      } catch (const json::exception&) {
        http_fail(400, "train body must be JSON");
      }
    }
    if (!body.is_object()) http_fail(400, "train body must be a JSON object");
    TrainOptions options;
    try {
      options.seed = body.value("seed", std::uint64_t{0});
      options.layer.simplify_iterations = body.value("simplify", 0);
    } catch (const json::exception&) {
      http_fail(400, "seed and simplify must be non-negative integers");
    }
    if (options.layer.simplify_iterations < 0) http_fail(400, "simplify must be >= 0");

    std::unique_lock lock(p.mutex);
    if (!p.arch) http_fail(409, "no architecture set");
    if (layer_number < 1 || static_cast<std::size_t>(layer_number) > p.arch->layers.size()) {
      http_fail(404, "layer " + std::to_string(layer_number) + " does not exist");
    }
    const auto l = static_cast<std::size_t>(layer_number - 1);
    for (std::size_t k = 0; k < l; ++k) {
      if (p.status[k] != LayerStatus::trained) {
        http_fail(409, "layer " + std::to_string(k + 1) + " is " + status_name(p.status[k]) +
                           "; train it first");
      }
    }
    std::vector<Image> imgs;
    std::vector<MarkerSet> marks;
    for (const std::string& name : p.marked_names()) {
      imgs.push_back(p.images.at(name));
      marks.push_back(p.markers.at(name));
    }
    if (imgs.empty()) http_fail(409, "no image has markers yet");

    const Model prefix = p.prefix_model(l);
    Model with_new = prefix;
    with_new.arch.layers = p.arch->layers;
    TrainedLayer layer;
    try {
      layer = train_next_layer(with_new, imgs, marks, options);
    } catch (const Error& e) {
      http_fail(e.code() == ErrorCode::invariant_violation ? 500 : 422, e.what());
    }

    const int h = imgs.front().height(), w = imgs.front().width();
    std::vector<TrainedLayer> before(prefix.layers);
    if (p.layers[l]) before.push_back(*p.layers[l]);
    std::vector<TrainedLayer> after(prefix.layers);
    after.push_back(layer);
    const auto params_after = count_params(after), flops_after = count_flops(after, h, w);
    const auto params_prefix = count_params(prefix.layers), flops_prefix = count_flops(prefix.layers, h, w);
    const auto params_before = count_params(before), flops_before = count_flops(before, h, w);

    json out{{"layer", layer_number},
             {"n_kernels", layer.out_channels()},
             {"params", params_after},
             {"flops", flops_after},
             {"layer_params", static_cast<std::int64_t>(params_after - params_prefix)},
             {"layer_flops", static_cast<std::int64_t>(flops_after - flops_prefix)},
             {"delta_params", static_cast<std::int64_t>(params_after) - static_cast<std::int64_t>(params_before)},
             {"delta_flops", static_cast<std::int64_t>(flops_after) - static_cast<std::int64_t>(flops_before)}};

    p.layers[l] = std::move(layer);
    p.status[l] = LayerStatus::trained;
    p.seeds[l] = options.seed;
    p.simplify[l] = options.layer.simplify_iterations;
    p.mark_stale_from(l + 1);
    p.save_state();
    out["project"] = p.summary();
    send_json(res, out);
  }

  // Model for reading layer `layer_number`; every layer up to it must be fresh.
  static Model readable_model(const Project& p, int layer_number) {
    if (!p.arch) http_fail(409, "no architecture set");
    if (layer_number < 1 || static_cast<std::size_t>(layer_number) > p.arch->layers.size()) {
      http_fail(404, "layer " + std::to_string(layer_number) + " does not exist");
    }
    const auto n = static_cast<std::size_t>(layer_number);
    for (std::size_t k = 0; k < n; ++k) {
      if (p.status[k] != LayerStatus::trained) {
        http_fail(409, "layer " + std::to_string(k + 1) + " is " + status_name(p.status[k]));
      }
    }
    return p.prefix_model(n);
  }

  static const Image& image_of(const Project& p, const std::string& name) {
    const auto it = p.images.find(name);
    if (it == p.images.end()) http_fail(404, "unknown image '" + name + "'");
    return it->second;
  }

  void activations(const Project& p, int layer_number, const std::string& name,
                   const httplib::Request& req, httplib::Response& res) {
    std::shared_lock lock(p.mutex);
    const Model model = readable_model(p, layer_number);
    const Image& img = image_of(p, name);
    if (img.channels() != model.arch.input_channels) {
      http_fail(422, "image channels do not match the architecture");
    }
    const Image feat = run_encoder(model, img, static_cast<std::size_t>(layer_number - 1));
    const int channel = req.has_param("channel") ? parse_int(req.get_param_value("channel"), "channel") : 0;
    if (channel < 0 || channel >= feat.channels()) {
      http_fail(400, "channel must be in [0, " + std::to_string(feat.channels()) + ")");
    }
    send_png(res, encode_gray_png(rescale_unit(feat.channel(channel))));
  }

  void decode_preview(const Project& p, const std::string& name, const httplib::Request& req,
                      httplib::Response& res) {
    std::shared_lock lock(p.mutex);
    int layer_number = 0;
    if (req.has_param("layer")) {
      layer_number = parse_int(req.get_param_value("layer"), "layer");
    } else {
      if (!p.arch) http_fail(409, "no architecture set");
      layer_number = static_cast<int>(p.arch->layers.size());
    }
    const Model model = readable_model(p, layer_number);
    const Image& img = image_of(p, name);
    if (img.channels() != model.arch.input_channels) {
      http_fail(422, "image channels do not match the architecture");
    }
    SaliencyResult s;
    try {
      s = saliency(model, img, static_cast<std::size_t>(layer_number - 1));
    } catch (const Error& e) {
      http_fail(422, e.what());
    }
    const Bytes png = encode_gray_png(s.map);
    if (req.get_param_value("format") == "png") {
      send_png(res, png);
      return;
    }
    const std::string raw(png.begin(), png.end());
    send_json(res, {{"layer", layer_number},
                    {"weights", json::parse(s.weights.to_json())},
                    {"png_base64", httplib::detail::base64_encode(raw)}});
  }

  void export_model(const Project& p, httplib::Response& res) {
    std::shared_lock lock(p.mutex);
    if (!p.arch) http_fail(409, "no architecture set");
    for (std::size_t k = 0; k < p.status.size(); ++k) {
      if (p.status[k] != LayerStatus::trained) {
        http_fail(409, "layer " + std::to_string(k + 1) + " is " + status_name(p.status[k]));
      }
    }
    const Bytes bytes = serialize_model(p.prefix_model(p.status.size()));
    res.status = 200;
    res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
  }

  // ---- routing ----

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const HttpError& e) {
        send_json(res, {{"error", e.message}}, e.status);
      } catch (const Error& e) {
        send_json(res, {{"error", e.what()}, {"code", std::string(to_string(e.code()))}}, 500);
      } catch (const std::exception& e) {
        spdlog::error("request {} {} failed: {}", req.method, req.path, e.what());
        send_json(res, {{"error", e.what()}}, 500);
      }
    };
  }

  void routes() {
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
    http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    http.Post("/projects", guarded([this](const auto&, auto& res) { create_project(res); }));
    http.Get(R"(/projects/([^/]+))", guarded([this](const auto& req, auto& res) {
               const auto p = find(req.matches[1]);
               std::shared_lock lock(p->mutex);
               send_json(res, p->summary());
             }));
    http.Post(R"(/projects/([^/]+)/images)", guarded([this](const auto& req, auto& res) {
                upload_image(*find(req.matches[1]), req, res);
              }));
    http.Put(R"(/projects/([^/]+)/images/([^/]+)/markers)", guarded([this](const auto& req, auto& res) {
               put_markers(*find(req.matches[1]), req.matches[2], req, res);
             }));
    http.Get(R"(/projects/([^/]+)/images/([^/]+)/markers)", guarded([this](const auto& req, auto& res) {
               get_markers(*find(req.matches[1]), req.matches[2], res);
             }));
    http.Put(R"(/projects/([^/]+)/arch)", guarded([this](const auto& req, auto& res) {
               put_arch(*find(req.matches[1]), req, res);
             }));
    http.Post(R"(/projects/([^/]+)/layers/(-?\d+)/train)", guarded([this](const auto& req, auto& res) {
                train(*find(req.matches[1]), parse_int(req.matches[2], "layer"), req, res);
              }));
    http.Get(R"(/projects/([^/]+)/layers/(-?\d+)/activations/([^/]+))",
             guarded([this](const auto& req, auto& res) {
               activations(*find(req.matches[1]), parse_int(req.matches[2], "layer"), req.matches[3],
                           req, res);
             }));
    http.Get(R"(/projects/([^/]+)/decode/([^/]+))", guarded([this](const auto& req, auto& res) {
               decode_preview(*find(req.matches[1]), req.matches[2], req, res);
             }));
    http.Get(R"(/projects/([^/]+)/export)", guarded([this](const auto& req, auto& res) {
               export_model(*find(req.matches[1]), res);
             }));
    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_json(res, {{"error", "not found"}}, res.status);
    });
  }
};

StudioServer::StudioServer(std::filesystem::path root) : impl_(std::make_unique<Impl>(std::move(root))) {}

StudioServer::~StudioServer() { stop(); }

int StudioServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->http.bind_to_any_port(host);
  return impl_->http.bind_to_port(host, port) ? port : -1;
}

void StudioServer::run() { impl_->http.listen_after_bind(); }

void StudioServer::stop() {
  if (impl_) impl_->http.stop();
}

void StudioServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace flim
