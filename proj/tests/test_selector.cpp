#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "sept/error.hpp"
#include "sept/ivf.hpp"
#include "sept/kmeans.hpp"
#include "sept/pool.hpp"
#include "sept/selector.hpp"
#include "sept/sq8.hpp"
#include "support/test_util.hpp"

using namespace sept;
using sept_test::random_pool;
using sept_test::ReferenceEntry;
using sept_test::reference_merge;

namespace {

void check_equals_reference(const SelectionManifest& manifest,
                            const std::vector<ReferenceEntry>& expected) {
  REQUIRE(manifest.entries.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const ManifestEntry& got = manifest.entries[i];
    const ReferenceEntry& want = expected[i];
    CHECK(got.pool_id == want.pool_id);
    CHECK(got.source_query_id == want.query_id);
    CHECK(got.rank == want.rank);
    CHECK(got.score == want.score);  // bit-exact
  }
}

std::string manifest_bytes(const SelectionManifest& manifest) {
  std::ostringstream os;
  write_manifest(manifest, os);
  return os.str();
}

SelectionManifest manifest_from_bytes(const std::string& bytes) {
  std::istringstream is(bytes);
  return read_manifest(is, "test bytes");
}

}  // namespace

TEST_CASE("randomized instances match the literal merge oracle bit-exactly") {
  Rng meta(20240817);
  for (int trial = 0; trial < 30; ++trial) {
    const Metric metric = trial % 2 == 0 ? Metric::cosine : Metric::l2;
    const std::uint64_t n = 50 + meta.below(1500);
    const Eigen::Index d = trial % 3 == 0 ? 4 : (trial % 3 == 1 ? 8 : 16);
    const std::uint64_t nq = 1 + meta.below(20);
    const std::uint64_t k = 1 + meta.below(std::min<std::uint64_t>(200, n));

    EmbeddingPool pool = random_pool(n, d, metric, 9000 + trial);
    EmbeddingPool queries = random_pool(nq, d, metric, 7000 + trial, /*id_base=*/1'000'000);

    SelectionManifest manifest = select(queries, pool, ExactBackend(pool), {k});
    CHECK(manifest.entries.size() == k);  // no exclusions: budget exactness
    check_equals_reference(manifest, reference_merge(queries, pool, k, {}));
  }
}

TEST_CASE("identical queries force lazy-depth doubling without changing results") {
  EmbeddingPool pool = random_pool(500, 8, Metric::cosine, 1);
  EmbeddingPool one = random_pool(1, 8, Metric::cosine, 2, /*id_base=*/5'000'000);
  EmbeddingPool queries;
  queries.metric = one.metric;
  queries.vectors.resize(8, 10);
  for (Eigen::Index i = 0; i < 10; ++i) {
    queries.vectors.col(i) = one.vectors.col(0);
    queries.ids.push_back(5'000'000 + static_cast<PoolId>(i));
  }
  // Identical lists mean each depth level admits one new id, so the merge
  // outruns the initial materialization depth 2*ceil(50/10) many times over.
  SelectionManifest manifest = select(queries, pool, ExactBackend(pool), {50});
  check_equals_reference(manifest, reference_merge(queries, pool, 50, {}));
}

TEST_CASE("k=0 yields an empty manifest with a digest") {
  EmbeddingPool pool = random_pool(20, 4, Metric::l2, 3);
  EmbeddingPool queries = random_pool(2, 4, Metric::l2, 4, /*id_base=*/100'000);
  SelectionManifest manifest = select(queries, pool, ExactBackend(pool), {0});
  CHECK(manifest.entries.empty());
  CHECK(manifest.budget.k == 0);
  CHECK(manifest.config_digest.size() == 16);
}

TEST_CASE("single query degenerates to exact top-k") {
  EmbeddingPool pool = random_pool(300, 6, Metric::cosine, 8);
  EmbeddingPool query = random_pool(1, 6, Metric::cosine, 9, /*id_base=*/44'000);
  SelectionManifest manifest = select(query, pool, ExactBackend(pool), {5});
  RankedList exact = search_exact(pool, query.vectors.col(0), 5);
  REQUIRE(manifest.entries.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(manifest.entries[i].pool_id == exact.hits[i].id);
    CHECK(manifest.entries[i].score == exact.hits[i].score);
    CHECK(manifest.entries[i].rank == i);
    CHECK(manifest.entries[i].source_query_id == 44'000);
  }
}

TEST_CASE("a shared top hit is admitted once; dedup pulls the next rank") {
  // Pool: a is both queries' best, b is q1's runner-up, c is q2's runner-up.
  EmbeddingPool pool;
  pool.metric = Metric::l2;
  pool.ids = {1, 2, 3, 4};
  pool.vectors.resize(2, 4);
  pool.vectors.col(0) << 0.0f, 0.0f;    // a: midpoint, nearest to both
  pool.vectors.col(1) << -1.0f, 0.0f;   // b: near q1
  pool.vectors.col(2) << 1.0f, 0.0f;    // c: near q2
  pool.vectors.col(3) << 0.0f, 10.0f;   // d: far from both

  EmbeddingPool queries;
  queries.metric = Metric::l2;
  queries.ids = {101, 102};
  queries.vectors.resize(2, 2);
  queries.vectors.col(0) << -0.4f, 0.0f;  // q1: a, then b
  queries.vectors.col(1) << 0.4f, 0.0f;   // q2: a, then c

  SelectionManifest manifest = select(queries, pool, ExactBackend(pool), {3});
  REQUIRE(manifest.entries.size() == 3);
  CHECK(manifest.entries[0].pool_id == 1);  // a admitted from q1 depth 0
  CHECK(manifest.entries[0].source_query_id == 101);
  CHECK(manifest.entries[0].rank == 0);
  CHECK(manifest.entries[1].pool_id == 2);  // q2's depth-0 'a' deduped; depth 1: q1 -> b
  CHECK(manifest.entries[1].rank == 1);
  CHECK(manifest.entries[2].pool_id == 3);  // q2 depth 1 -> c
  CHECK(manifest.entries[2].source_query_id == 102);
  std::unordered_set<PoolId> distinct;
  for (const ManifestEntry& e : manifest.entries) distinct.insert(e.pool_id);
  CHECK(distinct.size() == 3);
  check_equals_reference(manifest, reference_merge(queries, pool, 3, {}));
}

TEST_CASE("query ids present in the pool are excluded by default") {
  EmbeddingPool pool = random_pool(100, 5, Metric::l2, 11);  // ids 0..99
  EmbeddingPool queries = sept::subset_by_columns(pool, {0, 1, 2});  // same ids 0,1,2
  SelectionManifest manifest = select(queries, pool, ExactBackend(pool), {20});
  CHECK(manifest.entries.size() == 20);
  for (const ManifestEntry& e : manifest.entries) {
    CHECK(e.pool_id != 0);
    CHECK(e.pool_id != 1);
    CHECK(e.pool_id != 2);
  }
  std::unordered_set<PoolId> exclude = {0, 1, 2};
  check_equals_reference(manifest, reference_merge(queries, pool, 20, exclude));
}

TEST_CASE("explicit exclusion sets are honored") {
  EmbeddingPool pool = random_pool(60, 4, Metric::cosine, 13);
  EmbeddingPool queries = random_pool(3, 4, Metric::cosine, 14, /*id_base=*/800'000);
  SelectOptions opts;
  opts.exclude = std::unordered_set<PoolId>{5, 6, 7, 8};
  SelectionManifest manifest = select(queries, pool, ExactBackend(pool), {30}, opts);
  CHECK(manifest.entries.size() == 30);
  for (const ManifestEntry& e : manifest.entries) {
    CHECK(opts.exclude->count(e.pool_id) == 0);
  }
  check_equals_reference(manifest, reference_merge(queries, pool, 30, *opts.exclude));
}

TEST_CASE("unsatisfiable budgets fail loudly unless allow_short") {
  EmbeddingPool pool = random_pool(10, 4, Metric::l2, 15);
  EmbeddingPool queries = random_pool(2, 4, Metric::l2, 16, /*id_base=*/900'000);
  try {
    select(queries, pool, ExactBackend(pool), {11});
    FAIL("expected ValidationError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::validation);
    CHECK(std::string(e.what()).find("retrievable") != std::string::npos);
  }

  SelectOptions opts;
  opts.allow_short = true;
  SelectionManifest manifest = select(queries, pool, ExactBackend(pool), {11}, opts);
  CHECK(manifest.entries.size() == 10);  // everything retrievable, still short
  CHECK(manifest.budget.k == 11);
}

TEST_CASE("nonzero budget with no queries is rejected") {
  EmbeddingPool pool = random_pool(10, 4, Metric::l2, 17);
  EmbeddingPool none;
  none.metric = Metric::l2;
  none.vectors.resize(4, 0);
  CHECK_THROWS_AS(select(none, pool, ExactBackend(pool), {1}), ValidationError);
  CHECK(select(none, pool, ExactBackend(pool), {0}).entries.empty());
}

TEST_CASE("dimension and metric mismatches are rejected") {
  EmbeddingPool pool = random_pool(10, 4, Metric::l2, 18);
  EmbeddingPool wrong_dim = random_pool(2, 5, Metric::l2, 19, /*id_base=*/1000);
  CHECK_THROWS_AS(select(wrong_dim, pool, ExactBackend(pool), {2}), ValidationError);
  EmbeddingPool wrong_metric = random_pool(2, 4, Metric::cosine, 19, /*id_base=*/1000);
  CHECK_THROWS_AS(select(wrong_metric, pool, ExactBackend(pool), {2}), ValidationError);
}

TEST_CASE("budget hitting a full depth level is order-invariant as a set") {
  EmbeddingPool pool = random_pool(400, 8, Metric::cosine, 23);
  EmbeddingPool queries = random_pool(6, 8, Metric::cosine, 24, /*id_base=*/700'000);

  // Budget = number of distinct ids in the depth-4 prefixes; the merge then
  // stops exactly when level 3 completes, making the selected set equal to
  // that prefix union under any query order.
  const Eigen::Index j = 4;
  std::unordered_set<PoolId> prefix_union;
  for (Eigen::Index qi = 0; qi < queries.count(); ++qi) {
    const auto ranking = sept_test::full_ranking(pool, queries.vectors.col(qi).data());
    for (Eigen::Index r = 0; r < j; ++r) {
      prefix_union.insert(ranking[static_cast<std::size_t>(r)].id);
    }
  }
  const std::uint64_t budget = prefix_union.size();

  std::vector<std::vector<Eigen::Index>> orders = {
      {0, 1, 2, 3, 4, 5}, {5, 4, 3, 2, 1, 0}, {2, 0, 5, 1, 4, 3}};
  for (const auto& order : orders) {
    EmbeddingPool permuted = subset_by_columns(queries, order);
    SelectionManifest manifest = select(permuted, pool, ExactBackend(pool), {budget});
    REQUIRE(manifest.entries.size() == budget);
    std::unordered_set<PoolId> got;
    for (const ManifestEntry& e : manifest.entries) got.insert(e.pool_id);
    CHECK(got == prefix_union);
  }

  // Order sensitivity of the admission sequence itself: the first entry comes
  // from the first query in input order.
  EmbeddingPool reversed = subset_by_columns(queries, {5, 4, 3, 2, 1, 0});
  SelectionManifest fwd = select(queries, pool, ExactBackend(pool), {budget});
  SelectionManifest rev = select(reversed, pool, ExactBackend(pool), {budget});
  CHECK(fwd.entries[0].source_query_id == queries.ids[0]);
  CHECK(rev.entries[0].source_query_id == queries.ids[5]);
}

TEST_CASE("ivf backend at full probe with rerank matches the exact selection") {
  EmbeddingPool pool = random_pool(800, 10, Metric::cosine, 29);
  EmbeddingPool queries = random_pool(8, 10, Metric::cosine, 30, /*id_base=*/600'000);
  IvfIndex index = ivf_build(pool, kmeans_train(pool, 8, 5), fit_sq8(pool));

  IvfBackend backend(index, /*nprobe=*/8, /*rerank=*/true, &pool);
  SelectionManifest via_ivf = select(queries, pool, backend, {100});
  SelectionManifest via_exact = select(queries, pool, ExactBackend(pool), {100});
  REQUIRE(via_ivf.entries.size() == via_exact.entries.size());
  for (std::size_t i = 0; i < via_exact.entries.size(); ++i) {
    CHECK(via_ivf.entries[i].pool_id == via_exact.entries[i].pool_id);
    CHECK(via_ivf.entries[i].score == via_exact.entries[i].score);
  }
  CHECK(verify_manifest(via_ivf, queries, pool));
  // Backend identity feeds the digest.
  CHECK(via_ivf.config_digest != via_exact.config_digest);
}

TEST_CASE("ivf backend demands a pool when reranking") {
  EmbeddingPool pool = random_pool(50, 4, Metric::l2, 33);
  IvfIndex index = ivf_build(pool, kmeans_train(pool, 2, 1), fit_sq8(pool));
  CHECK_THROWS_AS(IvfBackend(index, 2, true, nullptr), ValidationError);
  CHECK_NOTHROW(IvfBackend(index, 2, false, nullptr));
}

TEST_CASE("manifests round-trip exactly, empty manifests included") {
  EmbeddingPool pool = random_pool(200, 6, Metric::l2, 35);
  EmbeddingPool queries = random_pool(4, 6, Metric::l2, 36, /*id_base=*/300'000);
  SelectionManifest manifest = select(queries, pool, ExactBackend(pool), {40});

  const std::string bytes = manifest_bytes(manifest);
  SelectionManifest loaded = manifest_from_bytes(bytes);
  CHECK(manifest_bytes(loaded) == bytes);
  REQUIRE(loaded.entries.size() == manifest.entries.size());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    CHECK(loaded.entries[i].pool_id == manifest.entries[i].pool_id);
    CHECK(loaded.entries[i].score == manifest.entries[i].score);  // %.9g round-trip
  }
  CHECK(loaded.budget.k == 40);
  CHECK(loaded.config_digest == manifest.config_digest);

  SelectionManifest empty = select(queries, pool, ExactBackend(pool), {0});
  const std::string empty_bytes = manifest_bytes(empty);
  CHECK(std::count(empty_bytes.begin(), empty_bytes.end(), '\n') == 3);  // header-only
  CHECK(manifest_bytes(manifest_from_bytes(empty_bytes)) == empty_bytes);
}

TEST_CASE("manifest line count is headers plus entries") {
  EmbeddingPool pool = random_pool(500, 4, Metric::l2, 37);
  EmbeddingPool queries = random_pool(2, 4, Metric::l2, 38, /*id_base=*/200'000);
  SelectionManifest manifest = select(queries, pool, ExactBackend(pool), {123});
  const std::string bytes = manifest_bytes(manifest);
  CHECK(std::count(bytes.begin(), bytes.end(), '\n') == 123 + 3);
}

TEST_CASE("manifest parse errors name the line") {
  const std::string good =
      "# sept-manifest v1\n# budget 2\n# config 0123456789abcdef\n7\t9\t0\t0.5\n";
  CHECK_NOTHROW(manifest_from_bytes(good));

  auto expect_error_at = [](const std::string& text, const char* needle) {
    try {
      manifest_from_bytes(text);
      FAIL("expected parse failure");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  expect_error_at("# wrong\n", "sept-manifest");
  expect_error_at("# sept-manifest v1\n# budget x\n", "bad budget");
  expect_error_at("# sept-manifest v1\n# budget 2\n# config zz\n", "hex");
  expect_error_at(good + "1\t2\t3\n", ":5");                     // 3 fields on line 5
  expect_error_at(good + "1\t2\t3\t4\t5\n", ":5");               // 5 fields
  expect_error_at(good + "x\t2\t0\t1.0\n", "bad pool id");
  expect_error_at(good + "8\t9\t0\tnan\n", "bad score");
  expect_error_at(good + "7\t9\t1\t0.25\n", "selected twice");   // duplicate pool id
  expect_error_at(good + "8\t9\t1\t0.25\n1\t9\t2\t0.1\n", "more than its budget");
}

TEST_CASE("verify_manifest accepts honest manifests and flags tampering") {
  EmbeddingPool pool = random_pool(300, 5, Metric::cosine, 41);
  EmbeddingPool queries = random_pool(5, 5, Metric::cosine, 42, /*id_base=*/400'000);
  SelectionManifest manifest = select(queries, pool, ExactBackend(pool), {30});
  CHECK(verify_manifest(manifest, queries, pool));

  SelectionManifest swapped = manifest;
  std::swap(swapped.entries[3], swapped.entries[7]);
  CHECK_FALSE(verify_manifest(swapped, queries, pool));

  SelectionManifest rescored = manifest;
  rescored.entries[0].score = std::nextafter(rescored.entries[0].score, 1e30f);
  CHECK_FALSE(verify_manifest(rescored, queries, pool));

  SelectionManifest dangling = manifest;
  dangling.entries[0].pool_id = 999'999;
  CHECK_THROWS_AS(verify_manifest(dangling, queries, pool), ValidationError);

  SelectionManifest bad_query = manifest;
  bad_query.entries[0].source_query_id = 123;
  CHECK_THROWS_AS(verify_manifest(bad_query, queries, pool), ValidationError);
}

TEST_CASE("manifest_subset returns the selected vectors in admission order") {
  EmbeddingPool pool = random_pool(100, 4, Metric::l2, 43);
  EmbeddingPool queries = random_pool(3, 4, Metric::l2, 44, /*id_base=*/500'000);
  SelectionManifest manifest = select(queries, pool, ExactBackend(pool), {15});
  EmbeddingPool selected = manifest_subset(manifest, pool);
  REQUIRE(selected.count() == 15);
  const auto index = build_id_index(pool);
  for (std::size_t i = 0; i < 15; ++i) {
    CHECK(selected.ids[i] == manifest.entries[i].pool_id);
    CHECK(selected.vectors.col(static_cast<Eigen::Index>(i)) ==
          pool.vectors.col(index.at(manifest.entries[i].pool_id)));
  }
}

TEST_CASE("digest is stable across repeated runs") {
  EmbeddingPool pool = random_pool(50, 4, Metric::l2, 45);
  EmbeddingPool queries = random_pool(2, 4, Metric::l2, 46, /*id_base=*/100'000);
  SelectionManifest a = select(queries, pool, ExactBackend(pool), {10});
  SelectionManifest b = select(queries, pool, ExactBackend(pool), {10});
  CHECK(a.config_digest == b.config_digest);
  CHECK(manifest_bytes(a) == manifest_bytes(b));
  SelectionManifest c = select(queries, pool, ExactBackend(pool), {11});
  CHECK(a.config_digest != c.config_digest);
}
