#include "flim/model_io.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "flim/error.hpp"
#include "flim/png_io.hpp"

namespace flim {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_tensor(std::vector<std::uint8_t>& out, std::span<const double> values) {
  put_u32(out, static_cast<std::uint32_t>(values.size()));
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    put_u32(out, bits);
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  std::uint32_t u32() {
    require(remaining() >= 4, ErrorCode::truncated_blob, "file ends inside a length field");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    require(remaining() >= n, ErrorCode::truncated_blob, "file ends inside a data block");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::vector<double> tensor(std::uint64_t expected, const std::string& what) {
    const std::uint32_t n = u32();
    require(static_cast<std::uint64_t>(n) * 4 <= remaining(), ErrorCode::truncated_blob,
            what + " is truncated");
    require(n == expected, ErrorCode::invariant_violation,
            what + " holds " + std::to_string(n) + " values, header implies " +
                std::to_string(expected));
    std::vector<double> out(n);
    for (auto& v : out) {
      const std::uint32_t bits = u32();
      const float f = std::bit_cast<float>(bits);
      v = static_cast<double>(f);
    }
    return out;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

json layer_header(const TrainedLayer& layer) {
  json j{{"spec", json::parse(layer_spec_to_json(layer.spec))},
         {"in_channels", layer.in_channels},
         {"n_kernels", layer.bank.count()},
         {"counts", std::vector<int>(layer.bank.counts().begin(), layer.bank.counts().end())},
         {"epsilon", layer.norm.epsilon}};
  if (layer.separable) j["separable_counts"] = layer.separable->counts;
  return j;
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  require(it != obj.end(), ErrorCode::malformed_header, where + "missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::malformed_header, where + "field '" + key + "' has the wrong type");
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model) {
  model.validate();
  json layers = json::array();
  for (const auto& l : model.layers) layers.push_back(layer_header(l));
  const json header{{"version", kModelVersion},
                    {"arch", json::parse(architecture_to_json(model.arch))},
                    {"seed", model.seed},
                    {"provenance", model.provenance},
                    {"layers", layers}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kModelMagic.begin(), kModelMagic.end());
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& l : model.layers) {
    put_tensor(out, l.norm.mean);
    put_tensor(out, l.norm.stdev);
    put_tensor(out, l.bank.values());
    if (l.separable) {
      put_tensor(out, l.separable->depthwise.values);
      put_tensor(out, l.separable->pointwise);
    }
  }
  return out;
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= kModelMagic.size() &&
              std::memcmp(bytes.data(), kModelMagic.data(), kModelMagic.size()) == 0,
          ErrorCode::bad_magic, "not a model file (bad magic)");
  Reader in(bytes.subspan(kModelMagic.size()));
  const std::uint32_t header_len = in.u32();
  const auto raw = in.take(header_len);

  json header;
  try {
    header = json::parse(raw.begin(), raw.end());
  } catch (const json::exception&) {
    fail(ErrorCode::malformed_header, "model header is not valid JSON");
  }
  require(header.is_object(), ErrorCode::malformed_header, "model header must be an object");
  const auto version = get<std::string>(header, "version", "");
  require(version.rfind("1.", 0) == 0, ErrorCode::unsupported_version,
          "unsupported model version " + version);

  Model model;
  const auto arch_it = header.find("arch");
  require(arch_it != header.end(), ErrorCode::malformed_header, "missing field 'arch'");
  model.arch = parse_architecture(arch_it->dump());
  model.seed = get<std::uint64_t>(header, "seed", "");
  model.provenance = get<std::vector<std::string>>(header, "provenance", "");
  const auto layers_it = header.find("layers");
  require(layers_it != header.end() && layers_it->is_array(), ErrorCode::malformed_header,
          "missing 'layers' array");

  std::size_t index = 0;
  for (const json& lj : *layers_it) {
    const std::string who = "layer " + std::to_string(++index) + ": ";
    require(lj.is_object(), ErrorCode::malformed_header, who + "entry must be an object");
    TrainedLayer layer;
    const auto spec_it = lj.find("spec");
    require(spec_it != lj.end(), ErrorCode::malformed_header, who + "missing field 'spec'");
    layer.spec = parse_layer_spec(spec_it->dump());
    try {
      layer.spec.validate();
    } catch (const Error& e) {
      fail(ErrorCode::invariant_violation, who + e.what());
    }
    layer.in_channels = get<int>(lj, "in_channels", who);
    require(layer.in_channels >= 1, ErrorCode::invariant_violation, who + "in_channels must be >= 1");
    const auto m = get<std::uint64_t>(lj, "n_kernels", who);
    const auto counts = get<std::vector<int>>(lj, "counts", who);
    require(counts.size() == m, ErrorCode::invariant_violation,
            who + "header lists " + std::to_string(m) + " kernels but " +
                std::to_string(counts.size()) + " counts");
    layer.norm.epsilon = get<double>(lj, "epsilon", who);

    const auto f = static_cast<std::uint64_t>(layer.in_channels);
    const auto a2 = static_cast<std::uint64_t>(layer.spec.kernel_size) * layer.spec.kernel_size;
    layer.norm.mean = in.tensor(f, who + "normalization mean");
    layer.norm.stdev = in.tensor(f, who + "normalization stdev");
    const std::vector<double> bank = in.tensor(m * a2 * f, who + "kernel bank");
    layer.bank = KernelBank(layer.spec.kernel_size, layer.in_channels);
    const std::size_t len = layer.bank.kernel_length();
    for (std::size_t c = 0; c < m; ++c) {
      require(counts[c] >= 1, ErrorCode::invariant_violation, who + "kernel counts must be >= 1");
      layer.bank.push_back(std::span<const double>(bank).subspan(c * len, len), counts[c]);
    }
    if (layer.spec.mode == ConvMode::separable) {
      SeparableLayer sep;
      sep.counts = get<std::vector<int>>(lj, "separable_counts", who);
      sep.depthwise.size = layer.spec.kernel_size;
      sep.depthwise.channels = layer.in_channels;
      sep.depthwise.values = in.tensor(a2 * f, who + "depthwise kernel");
      sep.pointwise = in.tensor(sep.counts.size() * f, who + "pointwise weights");
      layer.separable = std::move(sep);
    }
    model.layers.push_back(std::move(layer));
  }
  require(in.remaining() == 0, ErrorCode::invariant_violation,
          std::to_string(in.remaining()) + " trailing bytes after the weight blob");
  try {
    model.validate();
  } catch (const Error& e) {
    fail(ErrorCode::invariant_violation, e.what());
  }
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

Model load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

}  // namespace flim
