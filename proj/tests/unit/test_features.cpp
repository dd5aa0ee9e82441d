#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "framerepeat/errors.hpp"
#include "framerepeat/features.hpp"
#include "helpers.hpp"

using namespace framerepeat;
using features::SampleRecord;
namespace fs = std::filesystem;

namespace {

// Writes floats the way any producer on a little-endian host would.
void write_raw_f32(const fs::path& path, const std::vector<float>& values) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
}

LoadError::Kind load_error_kind(const fs::path& path) {
  try {
    features::load_sample(path);
  } catch (const LoadError& e) {
    return e.kind();
  }
  FAIL("load_sample did not throw");
  return LoadError::Kind::Format;
}

}  // namespace

TEST_CASE("cosine") {
  const std::vector<double> a = {0.3, -1.2, 2.0};
  CHECK(features::cosine(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(features::cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
  CHECK(std::abs(features::cosine(std::vector<double>{1, 0}, std::vector<double>{1, 1}) -
                 0.70711) < 1e-5);
  CHECK_THROWS_AS(features::cosine(std::vector<double>{0, 0}, std::vector<double>{1, 1}),
                  DegenerateInputError);
}

TEST_CASE("load a manifest written by hand") {
  testutil::TempDir tmp("features");
  const std::size_t n = 4, d = 8, l = 3;
  std::mt19937_64 rng(1);
  std::vector<float> frames(n * d), tokens(l * d), pooled(d), sims(n);
  std::normal_distribution<float> dist;
  for (float& v : frames) v = dist(rng);
  for (float& v : tokens) v = dist(rng);
  for (float& v : pooled) v = dist(rng);
  for (std::size_t i = 0; i < n; ++i) {
    double dotp = 0, na = 0, nb = 0;
    for (std::size_t j = 0; j < d; ++j) {
      dotp += double(frames[i * d + j]) * pooled[j];
      na += double(frames[i * d + j]) * frames[i * d + j];
      nb += double(pooled[j]) * pooled[j];
    }
    sims[i] = static_cast<float>(dotp / std::sqrt(na * nb));
  }
  write_raw_f32(tmp.path / "f.bin", frames);
  write_raw_f32(tmp.path / "t.bin", tokens);
  write_raw_f32(tmp.path / "p.bin", pooled);
  write_raw_f32(tmp.path / "s.bin", sims);
  nlohmann::json m = {{"format_version", 1}, {"sample_id", "hand"}, {"n_frames", n},
                      {"n_tokens", l},       {"dim", d},            {"n_options", 5},
                      {"answer_id", 3},
                      {"blobs", {{"frames", "f.bin"}, {"tokens", "t.bin"}, {"pooled", "p.bin"}, {"sims", "s.bin"}}}};
  std::ofstream(tmp.path / "manifest.json") << m.dump();

  const SampleRecord r = features::load_sample(tmp.path / "manifest.json");
  CHECK(r.sample_id == "hand");
  CHECK(r.n_frames() == n);
  CHECK(r.dim() == d);
  CHECK(r.question.n_tokens() == l);
  CHECK(r.answer_id == 3);
  CHECK(r.n_options == 5);
  for (std::size_t i = 0; i < n * d; ++i) CHECK(r.features.frames[i] == double(frames[i]));
  for (std::size_t i = 0; i < n; ++i) CHECK(r.features.sims[i] == double(sims[i]));

  SUBCASE("short blob") {
    frames.pop_back();
    write_raw_f32(tmp.path / "f.bin", frames);
    try {
      features::load_sample(tmp.path);
      FAIL("expected a byte-length error");
    } catch (const LoadError& e) {
      CHECK(e.kind() == LoadError::Kind::ByteLength);
      CHECK(std::string(e.what()).find("frames") != std::string::npos);
    }
  }
  SUBCASE("declared extents disagree with blobs") {
    m["dim"] = 7;
    std::ofstream(tmp.path / "manifest.json") << m.dump();
    CHECK(load_error_kind(tmp.path) == LoadError::Kind::ByteLength);
  }
  SUBCASE("missing blob file") {
    fs::remove(tmp.path / "t.bin");
    CHECK(load_error_kind(tmp.path) == LoadError::Kind::MissingFile);
  }
  SUBCASE("non-finite value") {
    frames[5] = std::numeric_limits<float>::quiet_NaN();
    write_raw_f32(tmp.path / "f.bin", frames);
    CHECK(load_error_kind(tmp.path) == LoadError::Kind::NonFinite);
  }
  SUBCASE("sims out of range") {
    sims[0] = 1.5f;
    write_raw_f32(tmp.path / "s.bin", sims);
    CHECK(load_error_kind(tmp.path) == LoadError::Kind::Range);
  }
  SUBCASE("sims inconsistent with frames") {
    sims[1] = sims[1] > 0 ? sims[1] - 0.01f : sims[1] + 0.01f;
    write_raw_f32(tmp.path / "s.bin", sims);
    CHECK(load_error_kind(tmp.path) == LoadError::Kind::Range);
  }
  SUBCASE("answer outside options") {
    m["answer_id"] = 5;
    std::ofstream(tmp.path / "manifest.json") << m.dump();
    CHECK(load_error_kind(tmp.path) == LoadError::Kind::Range);
  }
  SUBCASE("wrong version") {
    m["format_version"] = 2;
    std::ofstream(tmp.path / "manifest.json") << m.dump();
    CHECK(load_error_kind(tmp.path) == LoadError::Kind::Version);
  }
  SUBCASE("missing manifest") {
    CHECK(load_error_kind(tmp.path / "nope.json") == LoadError::Kind::MissingFile);
  }
}

TEST_CASE("save/load round trip is bit exact") {
  testutil::TempDir tmp("roundtrip");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 1 + seed % 7, d = 2 + seed % 9, l = 1 + seed % 4;
    const SampleRecord r = testutil::random_sample(n, d, l, seed, "rt" + std::to_string(seed));
    const fs::path dir = tmp.path / std::to_string(seed);
    features::save_sample(r, dir);
    const SampleRecord back = features::load_sample(dir);
    CHECK(back.sample_id == r.sample_id);
    CHECK(back.features.frames == r.features.frames);
    CHECK(back.question.tokens == r.question.tokens);
    CHECK(std::memcmp(back.question.pooled.data(), r.question.pooled.data(), d * sizeof(double)) == 0);
    CHECK(std::memcmp(back.features.sims.data(), r.features.sims.data(), n * sizeof(double)) == 0);
    CHECK(back.answer_id == r.answer_id);
    CHECK(back.n_options == r.n_options);
  }
}

TEST_CASE("single frame sample and deterministic bytes") {
  testutil::TempDir tmp("single");
  const SampleRecord r = testutil::random_sample(1, 6, 2, 3);
  features::save_sample(r, tmp.path / "a");
  features::save_sample(r, tmp.path / "b");
  CHECK(fs::file_size(tmp.path / "a" / "frames.f32") == 4 * 6);
  for (const char* f : {"manifest.json", "frames.f32", "tokens.f32", "pooled.f32", "sims.f32"})
    CHECK(testutil::read_file(tmp.path / "a" / f) == testutil::read_file(tmp.path / "b" / f));
}

TEST_CASE("f32 blob encoding is little endian") {
  const std::vector<double> v = {1.0, -2.5};
  const auto bytes = features::encode_f32(v);
  REQUIRE(bytes.size() == 8);
  // 1.0f = 0x3F800000
  CHECK(static_cast<unsigned char>(bytes[0]) == 0x00);
  CHECK(static_cast<unsigned char>(bytes[3]) == 0x3F);
  CHECK(static_cast<unsigned char>(bytes[2]) == 0x80);
  CHECK(features::decode_f32(bytes) == v);
}

TEST_CASE("save rejects invalid records") {
  testutil::TempDir tmp("invalid");
  SampleRecord r = testutil::random_sample(3, 4, 2, 1);
  r.answer_id = 9;
  CHECK_THROWS_AS(features::save_sample(r, tmp.path), LoadError);
}
