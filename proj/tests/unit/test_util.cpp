#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "vcg/util/atomic_file.hpp"
#include "vcg/util/parallel.hpp"
#include "vcg/util/rng.hpp"
#include "vcg/util/tensor_file.hpp"

using namespace vcg;

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(42, 1), b(42, 1), c(42, 2);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}

TEST_CASE("rng uniform_index stays in range and covers it") {
  Rng r(7);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.uniform_index(10);
    REQUIRE(v < 10);
    seen.insert(v);
  }
  CHECK(seen.size() == 10);
}

TEST_CASE("rng normal has unit moments") {
  Rng r(3);
  double s = 0, s2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.03);
  CHECK(std::abs(s2 / n - 1.0) < 0.05);
}

TEST_CASE("shuffle is a permutation") {
  Rng r(5);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  r.shuffle(v.begin(), v.end());
  std::set<int> s(v.begin(), v.end());
  CHECK(s.size() == 50);
}

TEST_CASE("tensor file round trip is byte identical") {
  TensorFile f;
  f.config_json = R"({"kind":"test"})";
  f.records.push_back({"a", {2, 3}, {1, 2, 3, 4, 5, 6}});
  f.records.push_back({"b", {1}, {-0.5f}});
  const auto bytes = encode_tensor_file(f);
  const auto g = decode_tensor_file(bytes);
  CHECK(g.config_json == f.config_json);
  REQUIRE(g.records.size() == 2);
  CHECK(g.find("a")->data == f.records[0].data);
  CHECK(g.find("b")->dims == std::vector<std::uint32_t>{1});
  CHECK(encode_tensor_file(g) == bytes);
}

TEST_CASE("tensor file rejects corruption") {
  TensorFile f;
  f.config_json = "{}";
  f.records.push_back({"a", {2}, {1, 2}});
  auto bytes = encode_tensor_file(f);
  CHECK_THROWS_AS(decode_tensor_file(bytes.substr(0, bytes.size() - 3)), TensorFileError);
  CHECK_THROWS_AS(decode_tensor_file("JUNKJUNKJUNK"), TensorFileError);
}

TEST_CASE("atomic write replaces the whole file") {
  const auto dir = std::filesystem::temp_directory_path() / "vcg_util_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "x.txt";
  write_file_atomic(path, "first version");
  write_file_atomic(path, "second");
  CHECK(read_file(path) == "second");
  std::filesystem::remove_all(dir);
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK(thread_budget() >= 1);
}
