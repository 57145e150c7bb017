#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "replay.hpp"

using namespace altlab;
using namespace altlab::replay;

namespace {
Transition make_t(double tag, bool terminal = false) {
  Transition t;
  t.obs = {tag, tag + 0.1, tag + 0.2};
  t.action = {tag * 0.5};
  t.reward = tag;
  t.next_obs = {tag + 1, tag + 1.1, tag + 1.2};
  t.terminal = terminal;
  return t;
}
}  // namespace

TEST_CASE("fifo eviction: oldest items leave first, order is preserved") {
  ReplayBuffer buf(5, 3, 1);
  for (int i = 0; i < 8; ++i) buf.push(make_t(i));
  CHECK(buf.size() == 5);
  CHECK(buf.capacity() == 5);
  CHECK(buf.total_pushed() == 8);
  const auto items = buf.contents();
  REQUIRE(items.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(items[i].reward == doctest::Approx(3.0 + i));
}

TEST_CASE("push validates shapes and finiteness") {
  ReplayBuffer buf(4, 3, 1);
  Transition bad = make_t(1);
  bad.obs.pop_back();
  CHECK_THROWS_AS(buf.push(bad), ShapeError);
  Transition nan_t = make_t(1);
  nan_t.reward = std::nan("");
  CHECK_THROWS_AS(buf.push(nan_t), NumericError);
  CHECK(buf.size() == 0);
  CHECK_THROWS_AS(ReplayBuffer(0, 3, 1), ConfigError);
}

TEST_CASE("sampling is uniform over the stored items") {
  ReplayBuffer buf(16, 3, 1);
  for (int i = 0; i < 16; ++i) buf.push(make_t(i));
  Rng rng(2024);
  std::map<double, int> counts;
  const int batches = 2500, batch_size = 16;
  for (int b = 0; b < batches; ++b) {
    const Batch batch = buf.sample(batch_size, rng);
    REQUIRE(batch.size() == batch_size);
    for (int i = 0; i < batch_size; ++i) counts[batch.rewards[i]] += 1;
  }
  const double total = batches * batch_size;
  REQUIRE(counts.size() == 16);
  for (const auto& [tag, n] : counts) CHECK(std::abs(n / total - 1.0 / 16) < 0.01);
}

TEST_CASE("sample preconditions and shapes") {
  ReplayBuffer buf(8, 3, 2);
  Rng rng(1);
  CHECK_THROWS_AS(buf.sample(1, rng), PreconditionError);
  Transition t;
  t.obs = {1, 2, 3};
  t.action = {0.5, -0.5};
  t.reward = 1.0;
  t.next_obs = {2, 3, 4};
  t.terminal = true;
  buf.push(t);
  buf.push(t);
  CHECK_THROWS_AS(buf.sample(3, rng), PreconditionError);
  CHECK_THROWS_AS(buf.sample(0, rng), PreconditionError);
  const Batch b = buf.sample(2, rng);
  CHECK(b.obs.rows == 2);
  CHECK(b.obs.cols == 3);
  CHECK(b.actions.cols == 2);
  CHECK(b.next_obs.cols == 3);
  CHECK(b.terminals[0] == 1);
}

TEST_CASE("sampling is deterministic given the rng state") {
  ReplayBuffer buf(16, 3, 1);
  for (int i = 0; i < 16; ++i) buf.push(make_t(i));
  Rng a(7), b(7);
  const Batch ba = buf.sample(8, a);
  const Batch bb = buf.sample(8, b);
  CHECK(ba.obs.data == bb.obs.data);
  CHECK(ba.rewards == bb.rewards);
}

TEST_CASE("set_capacity shrink keeps the newest items in order") {
  ReplayBuffer buf(10, 3, 1);
  for (int i = 0; i < 10; ++i) buf.push(make_t(i));
  buf.set_capacity(4);
  CHECK(buf.capacity() == 4);
  CHECK(buf.size() == 4);
  auto items = buf.contents();
  for (int i = 0; i < 4; ++i) CHECK(items[i].reward == doctest::Approx(6.0 + i));

  // FIFO keeps working after the shrink
  buf.push(make_t(100));
  items = buf.contents();
  CHECK(items.front().reward == doctest::Approx(7.0));
  CHECK(items.back().reward == doctest::Approx(100.0));
  CHECK(buf.size() == 4);
}

TEST_CASE("set_capacity grow preserves contents") {
  ReplayBuffer buf(3, 3, 1);
  for (int i = 0; i < 5; ++i) buf.push(make_t(i));  // holds 2,3,4
  const auto before = buf.content_hash();
  buf.set_capacity(10);
  CHECK(buf.size() == 3);
  CHECK(buf.content_hash() == before);  // same items, same order
  const auto items = buf.contents();
  for (int i = 0; i < 3; ++i) CHECK(items[i].reward == doctest::Approx(2.0 + i));
}

TEST_CASE("content_hash tracks contents and order") {
  ReplayBuffer a(8, 3, 1), b(8, 3, 1), c(8, 3, 1);
  for (int i = 0; i < 4; ++i) a.push(make_t(i));
  for (int i = 0; i < 4; ++i) b.push(make_t(i));
  for (int i = 3; i >= 0; --i) c.push(make_t(i));
  CHECK(a.content_hash() == b.content_hash());
  CHECK(a.content_hash() != c.content_hash());
  b.push(make_t(9));
  CHECK(a.content_hash() != b.content_hash());

  // terminal flag participates in the hash
  ReplayBuffer d(8, 3, 1), e(8, 3, 1);
  d.push(make_t(1, false));
  e.push(make_t(1, true));
  CHECK(d.content_hash() != e.content_hash());
}

TEST_CASE("recent_observations returns the newest rows oldest-first") {
  ReplayBuffer buf(5, 3, 1);
  CHECK_THROWS_AS(buf.recent_observations(4), PreconditionError);
  for (int i = 0; i < 8; ++i) buf.push(make_t(i));  // holds tags 3..7
  const Matrix probe = buf.recent_observations(3);  // tags 5, 6, 7
  REQUIRE(probe.rows == 3);
  REQUIRE(probe.cols == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(probe.at(i, 0) == doctest::Approx(5.0 + i));
    CHECK(probe.at(i, 2) == doctest::Approx(5.0 + i + 0.2));
  }
  // asking for more than stored returns everything
  const Matrix all = buf.recent_observations(100);
  CHECK(all.rows == 5);
  CHECK(all.at(0, 0) == doctest::Approx(3.0));
  CHECK_THROWS_AS(buf.recent_observations(0), PreconditionError);
}
