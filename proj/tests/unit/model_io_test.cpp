#include <gtest/gtest.h>

#include <cstring>
#include <functional>

#include <json.hpp>

#include "flim/error.hpp"
#include "flim/model_io.hpp"
#include "flim/png_io.hpp"
#include "random.hpp"
#include "synthetic.hpp"

namespace flim {
namespace {

class ModelIoTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto samples = test::make_blob_corpus(2, 17, 48);
    std::vector<Image> images;
    std::vector<MarkerSet> markers;
    for (const auto& s : samples) {
      images.push_back(s.image);
      markers.push_back(markers_from_raster(s.markers, s.name));
    }
    TrainOptions opt;
    opt.seed = 99;
    ArchitectureSpec arch = test::blob_architecture();
    regular_ = new Model(train_encoder(images, markers, arch, opt, {"a.png", "b.png"}));
    arch.layers[1].mode = ConvMode::separable;
    mixed_ = new Model(train_encoder(images, markers, arch, opt));
  }
  static void TearDownTestSuite() {
    delete regular_;
    delete mixed_;
  }

  static ErrorCode code_of(const std::vector<std::uint8_t>& bytes) {
    try {
      deserialize_model(bytes);
    } catch (const Error& e) {
      return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::io;
  }

  // Rewrites the JSON header and fixes up its length field.
  static std::vector<std::uint8_t> with_header(const std::vector<std::uint8_t>& bytes,
                                               const std::function<void(nlohmann::json&)>& edit) {
    std::uint32_t len = 0;
    std::memcpy(&len, bytes.data() + 5, 4);
    nlohmann::json h = nlohmann::json::parse(bytes.begin() + 9, bytes.begin() + 9 + len);
    edit(h);
    const std::string text = h.dump();
    std::vector<std::uint8_t> out(bytes.begin(), bytes.begin() + 5);
    const auto n = static_cast<std::uint32_t>(text.size());
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(n >> (8 * k)));
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), bytes.begin() + 9 + len, bytes.end());
    return out;
  }

  static Model* regular_;
  static Model* mixed_;
};

Model* ModelIoTest::regular_ = nullptr;
Model* ModelIoTest::mixed_ = nullptr;

TEST_F(ModelIoTest, RoundTripIsExact) {
  for (const Model* m : {regular_, mixed_}) {
    const auto bytes = serialize_model(*m);
    const Model back = deserialize_model(bytes);
    EXPECT_EQ(back, *m);
    EXPECT_EQ(serialize_model(back), bytes);
  }
  EXPECT_EQ(deserialize_model(serialize_model(*regular_)).provenance,
            (std::vector<std::string>{"a.png", "b.png"}));
}

TEST_F(ModelIoTest, ContainerLayout) {
  const auto bytes = serialize_model(*regular_);
  ASSERT_GT(bytes.size(), 9u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "FLIM1");
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + 5, 4);
  const auto h = nlohmann::json::parse(bytes.begin() + 9, bytes.begin() + 9 + len);
  EXPECT_EQ(h.at("version"), "1.0");
  EXPECT_EQ(h.at("seed"), 99);
  EXPECT_EQ(h.at("layers").size(), 2u);
  // Payload: per layer 3 tensors of u32 length + float32 values.
  std::size_t payload = 0;
  for (const auto& l : regular_->layers) {
    payload += 3 * 4 + 4 * (l.norm.mean.size() + l.norm.stdev.size() + l.bank.values().size());
  }
  EXPECT_EQ(bytes.size(), 9 + len + payload);
}

TEST_F(ModelIoTest, SaveAndLoad) {
  const auto dir = test::scratch_dir("model_io");
  save_model(*mixed_, dir / "m.flim");
  EXPECT_EQ(load_model(dir / "m.flim"), *mixed_);
  EXPECT_THROW(load_model(dir / "missing.flim"), Error);
}

TEST_F(ModelIoTest, TypedErrors) {
  const auto good = serialize_model(*regular_);
  auto bad = good;
  bad[0] = 'X';
  EXPECT_EQ(code_of(bad), ErrorCode::bad_magic);
  EXPECT_EQ(code_of({'F', 'L'}), ErrorCode::bad_magic);
  EXPECT_EQ(code_of({'F', 'L', 'I', 'M', '1', 3}), ErrorCode::truncated_blob);

  EXPECT_EQ(code_of(with_header(good, [](auto& h) { h["version"] = "2.0"; })),
            ErrorCode::unsupported_version);
  EXPECT_EQ(code_of(with_header(good, [](auto& h) { h.erase("seed"); })), ErrorCode::malformed_header);
  EXPECT_EQ(code_of(with_header(good, [](auto& h) { h["layers"][0]["counts"] = "x"; })),
            ErrorCode::malformed_header);
  EXPECT_EQ(code_of(with_header(good, [](auto& h) { h["layers"][0]["in_channels"] = 2; })),
            ErrorCode::invariant_violation);

  bad = good;
  bad[9] = '!';
  EXPECT_EQ(code_of(bad), ErrorCode::malformed_header);

  bad = good;
  bad.pop_back();
  EXPECT_EQ(code_of(bad), ErrorCode::truncated_blob);

  bad = good;
  bad.push_back(0);
  EXPECT_EQ(code_of(bad), ErrorCode::invariant_violation);

  // A NaN weight is structurally fine but breaks the model invariants.
  bad = good;
  const std::uint32_t nan_bits = 0x7fc00000u;
  std::memcpy(bad.data() + bad.size() - 4, &nan_bits, 4);
  EXPECT_EQ(code_of(bad), ErrorCode::invariant_violation);
}

TEST_F(ModelIoTest, EveryTruncationIsRejected) {
  const auto good = serialize_model(*mixed_);
  for (std::size_t n = 0; n < good.size(); n += 1 + n / 64) {
    const std::vector<std::uint8_t> cut(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(n));
    EXPECT_THROW(deserialize_model(cut), Error) << "length " << n;
  }
}

// Random byte flips either load as a valid model or raise a typed error.
TEST_F(ModelIoTest, CorruptionNeverEscapesAsAnotherException) {
  const auto good = serialize_model(*regular_);
  test::Rng rng(81);
  for (int trial = 0; trial < 500; ++trial) {
    auto bytes = good;
    const int flips = rng.integer(1, 4);
    for (int k = 0; k < flips; ++k) {
      bytes[static_cast<std::size_t>(rng.integer(0, static_cast<int>(bytes.size()) - 1))] ^=
          static_cast<std::uint8_t>(rng.integer(1, 255));
    }
    try {
      const Model m = deserialize_model(bytes);
      EXPECT_NO_THROW(m.validate());
    } catch (const Error&) {
    } catch (const std::exception& e) {
      FAIL() << "trial " << trial << ": untyped exception " << e.what();
    }
  }
}

}  // namespace
}  // namespace flim
