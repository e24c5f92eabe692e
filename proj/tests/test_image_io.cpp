#include <doctest.h>

#include <cmath>
#include <set>

#include "peekaboom/dataset.hpp"
#include "peekaboom/encoding.hpp"
#include "peekaboom/error.hpp"
#include "peekaboom/image.hpp"
#include "peekaboom/png_io.hpp"
#include "support.hpp"

using namespace peekaboom;

namespace {

ImageTensor quantized_image(std::size_t w, std::size_t h, std::size_t c, unsigned salt) {
  ImageTensor img = ImageTensor::filled(w, h, c, 0.0);
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    img.values[i] = static_cast<double>((i * 37 + salt) % 256) / 255.0;
  }
  return img;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::invalid_argument;
}

}  // namespace

TEST_CASE("image tensor validation") {
  ImageTensor img = ImageTensor::filled(2, 2, 3, 0.5);
  CHECK_NOTHROW(img.validate());
  CHECK(img.value_count() == 12);

  img.values[5] = 1.5;
  CHECK(code_of([&] { img.validate(); }) == Errc::out_of_range);
  img.values[5] = std::nan("");
  CHECK(code_of([&] { img.validate(); }) == Errc::non_finite);

  ImageTensor two = ImageTensor::filled(2, 2, 2, 0.5);
  CHECK_THROWS_AS(two.validate(), Error);
  ImageTensor short_values = ImageTensor::filled(2, 2, 1, 0.5);
  short_values.values.pop_back();
  CHECK_THROWS_AS(short_values.validate(), Error);
}

TEST_CASE("png round trip is exact on the 8-bit grid") {
  for (std::size_t c : {1u, 3u}) {
    const ImageTensor img = quantized_image(7, 5, c, static_cast<unsigned>(c));
    CHECK(decode_png(encode_png(img)) == img);
  }
}

TEST_CASE("png quantizes to the nearest 8-bit level") {
  ImageTensor img = ImageTensor::filled(2, 1, 1, 0.0);
  img.values = {0.3, 0.999};
  const ImageTensor back = decode_png(encode_png(img));
  CHECK(back.values[0] == doctest::Approx(std::round(0.3 * 255) / 255.0));
  CHECK(back.values[1] == 1.0);
}

TEST_CASE("png decode rejects garbage") {
  const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
  CHECK(code_of([&] { decode_png(junk); }) == Errc::png);
}

TEST_CASE("mask png round trip") {
  std::vector<std::uint8_t> mask(6 * 4, 0);
  for (std::size_t i = 0; i < mask.size(); i += 3) mask[i] = 1;
  std::size_t w = 0, h = 0;
  const auto back = decode_mask_png(encode_mask_png(mask, 6, 4), w, h);
  CHECK(w == 6);
  CHECK(h == 4);
  CHECK(back == mask);
}

TEST_CASE("base64 known vectors") {
  auto enc = [](std::string_view s) {
    return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  };
  CHECK(enc("") == "");
  CHECK(enc("f") == "Zg==");
  CHECK(enc("fo") == "Zm8=");
  CHECK(enc("foo") == "Zm9v");
  CHECK(enc("foobar") == "Zm9vYmFy");

  const auto bytes = base64_decode("Zm9vYmE=");
  CHECK(std::string(bytes.begin(), bytes.end()) == "fooba");
  CHECK(code_of([] { base64_decode("Zm9v!!"); }) == Errc::protocol);
  CHECK(code_of([] { base64_decode("Zm9"); }) == Errc::protocol);
}

TEST_CASE("base64 round trip over all byte values") {
  std::vector<std::uint8_t> all(256);
  for (int i = 0; i < 256; ++i) all[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  for (std::size_t n = 0; n < all.size(); n += 17) {
    std::span<const std::uint8_t> part(all.data(), n);
    const auto back = base64_decode(base64_encode(part));
    CHECK(std::equal(back.begin(), back.end(), part.begin(), part.end()));
  }
}

TEST_CASE("random tokens carry 128 bits as hex and do not repeat") {
  std::set<std::string> seen;
  for (int i = 0; i < 200; ++i) {
    const std::string t = random_token(16);
    CHECK(t.size() == 32);
    CHECK(t.find_first_not_of("0123456789abcdef") == std::string::npos);
    seen.insert(t);
  }
  CHECK(seen.size() == 200);
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("dataset save and load") {
  testing::TempDir dir("ds");
  Dataset ds;
  ds.class_names = {"a", "b"};
  for (int i = 0; i < 4; ++i) {
    DatasetItem item;
    item.id = "im" + std::to_string(i);
    item.label = i % 2;
    item.image = quantized_image(5, 3, 3, static_cast<unsigned>(i));
    if (i != 3) {
      item.object_mask.assign(15, 0);
      item.object_mask[static_cast<std::size_t>(i)] = 1;
    }
    ds.items.push_back(item);
  }
  save_dataset(ds, dir.path());
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "images/im0.png"));
  CHECK(std::filesystem::exists(dir / "masks/im0.png"));
  CHECK_FALSE(std::filesystem::exists(dir / "masks/im3.png"));
  CHECK(load_dataset(dir.path()) == ds);
  CHECK(load_dataset(dir.path()).find("im2").label == 0);
  CHECK_THROWS_AS(load_dataset(dir.path()).find("nope"), Error);
}

TEST_CASE("dataset validation catches mixed shapes and bad labels") {
  Dataset ds;
  ds.class_names = {"a"};
  DatasetItem a{"a", ImageTensor::filled(2, 2, 1, 0.1), 0, {}};
  DatasetItem b{"b", ImageTensor::filled(3, 2, 1, 0.1), 0, {}};
  ds.items = {a, b};
  CHECK_THROWS_AS(ds.validate(), Error);
  ds.items = {a};
  ds.items[0].label = 1;
  CHECK_THROWS_AS(ds.validate(), Error);
}
