#include <doctest.h>

#include "rsr/checkpoint_io.hpp"
#include "rsr/error.hpp"
#include "support.hpp"

using namespace rsr;

TEST_CASE("save then load restores every tensor bitwise") {
  auto ckpt = rsr::test::tiny_checkpoint(21);
  auto dir = rsr::test::scratch_dir("checkpoint_roundtrip");
  save_checkpoint(ckpt, dir / "m.ckpt");
  auto back = load_checkpoint(dir / "m.ckpt");
  CHECK(back.config == ckpt.config);
  CHECK(back.vocab == ckpt.vocab);
  auto a = ckpt.weights.tensors();
  auto b = back.weights.tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(bitwise_equal(*a[i], *b[i]));
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(ckpt));
}

TEST_CASE("wrong magic is rejected") {
  auto bytes = serialize_checkpoint(rsr::test::tiny_checkpoint(22));
  bytes[0] = 'X';
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(bytes), "not a checkpoint", FormatError);
}

TEST_CASE("unknown version is rejected") {
  auto bytes = serialize_checkpoint(rsr::test::tiny_checkpoint(23));
  bytes[4] = 9;
  CHECK_THROWS_AS(deserialize_checkpoint(bytes), FormatError);
}

TEST_CASE("tensor sizes past the end of the file are a truncation error") {
  auto bytes = serialize_checkpoint(rsr::test::tiny_checkpoint(24));
  for (std::size_t cut : {bytes.size() - 1, bytes.size() - 8, bytes.size() / 2, std::size_t{30}}) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(deserialize_checkpoint(part), FormatError);
  }
  std::vector<std::uint8_t> tail_cut(bytes.begin(), bytes.end() - 8);
  CHECK_THROWS_WITH(deserialize_checkpoint(tail_cut), "checkpoint truncated");
}

TEST_CASE("trailing bytes are rejected") {
  auto bytes = serialize_checkpoint(rsr::test::tiny_checkpoint(25));
  bytes.push_back(0);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes), FormatError);
}

TEST_CASE("missing file is an error") {
  CHECK_THROWS_AS(load_checkpoint(std::filesystem::path(RSR_TEST_TMP) / "does-not-exist.ckpt"), Error);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
  const std::uint8_t a[] = {'a'};
  CHECK(fnv1a64(a) == 0xaf63dc4c8601ec8cULL);
}
