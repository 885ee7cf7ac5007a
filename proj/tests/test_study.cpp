#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <set>

#include "pathgan/service/schema.hpp"
#include "pathgan/service/study.hpp"

namespace pathgan::service {
namespace {

StudyCorpus corpus(int ng = 60, int nr = 60, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  StudyCorpus c;
  c.gen_features.resize(ng, 5);
  c.real_features.resize(nr, 5);
  for (int i = 0; i < ng; ++i) {
    c.gen_ids.push_back("gen-" + std::to_string(i));
    for (int j = 0; j < 5; ++j) c.gen_features(i, j) = z(rng) + 0.5;
  }
  for (int i = 0; i < nr; ++i) {
    c.real_ids.push_back("real-" + std::to_string(i));
    for (int j = 0; j < 5; ++j) c.real_features(i, j) = z(rng);
  }
  return c;
}

double mann_whitney(const std::vector<std::pair<double, bool>>& s) {
  double wins = 0;
  int np = 0, nn = 0;
  for (const auto& [a, ta] : s) {
    if (!ta) continue;
    ++np;
    for (const auto& [b, tb] : s)
      if (!tb) wins += a > b ? 1.0 : a == b ? 0.5 : 0.0;
  }
  for (const auto& p : s) nn += !p.second;
  return wins / (double(np) * nn);
}

std::filesystem::path tmpdir(const std::string& tag) {
  auto d = std::filesystem::temp_directory_path() / ("pathgan-study-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  return d;
}

TEST(StudySelection, CompositionAndIds) {
  const auto c = corpus();
  const auto items = select_study_items(c, 11);
  ASSERT_EQ(items.size(), 50u);
  std::map<std::string, int> modes;
  std::set<std::string> ids, images;
  int real = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    modes[items[i].mode]++;
    real += items[i].real;
    ids.insert(items[i].item_id);
    images.insert(items[i].image_id);
    EXPECT_EQ(items[i].real, items[i].mode == "neighbor");
    EXPECT_EQ(items[i].real, items[i].image_id.rfind("real-", 0) == 0);
  }
  EXPECT_EQ(real, 25);
  EXPECT_EQ(modes["curated"], 12);
  EXPECT_EQ(modes["nearest-distance"], 13);
  EXPECT_EQ(modes["neighbor"], 25);
  EXPECT_EQ(ids.size(), 50u);
  EXPECT_EQ(images.size(), 50u);
  EXPECT_TRUE(ids.count("item-00") && ids.count("item-49"));
}

TEST(StudySelection, NearestDistanceItemsAreTheClosestRemaining) {
  const auto c = corpus();
  const auto items = select_study_items(c, 3);
  std::vector<std::pair<double, std::string>> d;
  for (Eigen::Index i = 0; i < c.gen_features.rows(); ++i)
    d.emplace_back((c.real_features.rowwise() - c.gen_features.row(i)).rowwise().norm().minCoeff(), c.gen_ids[static_cast<std::size_t>(i)]);
  std::set<std::string> curated, nearest;
  for (const auto& it : items) {
    if (it.mode == "curated") curated.insert(it.image_id);
    if (it.mode == "nearest-distance") nearest.insert(it.image_id);
  }
  std::sort(d.begin(), d.end());
  std::set<std::string> expect;
  for (const auto& [dist, id] : d)
    if (!curated.count(id) && expect.size() < 13) expect.insert(id);
  EXPECT_EQ(nearest, expect);
}

TEST(StudySelection, SeedDeterministic) {
  const auto c = corpus();
  const auto a = select_study_items(c, 5), b = select_study_items(c, 5), d = select_study_items(c, 6);
  bool same_other = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image_id, b[i].image_id);
    EXPECT_EQ(a[i].mode, b[i].mode);
    same_other = same_other && a[i].image_id == d[i].image_id;
  }
  EXPECT_FALSE(same_other);
}

TEST(StudySelection, ExplicitCuratedListAndCorpusChecks) {
  auto c = corpus();
  for (int i = 40; i < 52; ++i) c.curated.push_back("gen-" + std::to_string(i));
  const auto items = select_study_items(c, 1);
  std::set<std::string> cur;
  for (const auto& i : items)
    if (i.mode == "curated") cur.insert(i.image_id);
  EXPECT_EQ(cur, std::set<std::string>(c.curated.begin(), c.curated.end()));

  c.curated.push_back("gen-999");
  EXPECT_THROW(select_study_items(c, 1), NotFoundError);
  c.curated = {"gen-1", "gen-2"};
  EXPECT_THROW(select_study_items(c, 1), ConfigError);
  EXPECT_THROW(select_study_items(corpus(24, 60), 1), ConfigError);
  EXPECT_THROW(select_study_items(corpus(60, 24), 1), ConfigError);
  auto bad = corpus();
  bad.gen_ids.pop_back();
  EXPECT_THROW(StudyManager{bad}, ConfigError);
}

TEST(StudySession, RatingRulesAndIdempotency) {
  StudyManager m(corpus());
  auto& s = m.create(1);
  const auto first = s.items()[0].item_id;
  EXPECT_THROW(m.rate(s.id(), first, 0, ""), ArgumentError);
  EXPECT_THROW(m.rate(s.id(), first, 6, ""), ArgumentError);
  EXPECT_THROW(m.rate(s.id(), "item-99", 3, ""), NotFoundError);
  EXPECT_THROW(m.rate("study-x", first, 3, ""), NotFoundError);
  auto r = m.rate(s.id(), first, 4, "k1");
  EXPECT_FALSE(r.duplicate);
  EXPECT_EQ(r.remaining, 49);
  r = m.rate(s.id(), first, 4, "k1");
  EXPECT_TRUE(r.duplicate);
  EXPECT_EQ(r.remaining, 49);
  EXPECT_THROW(m.rate(s.id(), first, 5, "k1"), StateError);
  EXPECT_THROW(m.rate(s.id(), first, 4, "k2"), StateError);
  EXPECT_THROW(m.rate(s.id(), first, 4, ""), StateError);
  EXPECT_THROW(m.result(s.id()), StateError);
  EXPECT_EQ(*s.next_unrated(), 1);
  for (std::size_t i = 1; i < 50; ++i) m.rate(s.id(), s.items()[i].item_id, 3, "");
  EXPECT_FALSE(s.next_unrated().has_value());
  m.result(s.id());
  EXPECT_TRUE(s.complete());
  EXPECT_THROW(m.rate(s.id(), first, 4, "k1"), StateError);
}

TEST(StudySession, PublicViewHidesTruth) {
  StudyManager m(corpus());
  auto& s = m.create(2);
  m.rate(s.id(), s.items()[3].item_id, 2, "");
  const auto v = s.public_view();
  EXPECT_TRUE(validate(v, response_schemas()["study_session"]).empty());
  const auto text = v.dump();
  for (const char* leak : {"real", "generated", "gen-", "curated", "neighbor", "nearest", "mode", "image_id"})
    EXPECT_EQ(text.find(leak), std::string::npos) << leak;
  EXPECT_EQ(v["items"][3]["rating"], 2);
  EXPECT_EQ(v["next_unrated"], 0);
  EXPECT_EQ(v["status"], "open");
}

TEST(StudySession, ResultMatchesMannWhitney) {
  StudyManager m(corpus());
  auto& s = m.create(3);
  Rng rng(4);
  for (const auto& it : s.items()) {
    const int r = std::uniform_int_distribution<int>(1, 5)(rng);
    m.rate(s.id(), it.item_id, std::min(5, r + (it.real ? 1 : 0)), "");
  }
  const auto res = m.result(s.id());
  EXPECT_TRUE(validate(res, response_schemas()["study_result"]).empty());
  EXPECT_NEAR(res["roc"]["auc"].get<double>(), mann_whitney(s.scored()), 1e-12);
  EXPECT_EQ(res["roc"]["positives"], 25);
  EXPECT_EQ(res["items"].size(), 50u);
  EXPECT_EQ(res["svg"].get<std::string>().rfind("<svg", 0), 0u);
  // Result is stable and repeatable.
  EXPECT_EQ(m.result(s.id())["roc"], res["roc"]);
}

TEST(StudySession, PerfectAndInvertedReaders) {
  StudyManager m(corpus());
  auto& a = m.create(4);
  auto& b = m.create(4);
  EXPECT_NE(a.id(), b.id());
  for (const auto& it : a.items()) m.rate(a.id(), it.item_id, it.real ? 5 : 1, "");
  for (const auto& it : b.items()) m.rate(b.id(), it.item_id, it.real ? 1 : 5, "");
  EXPECT_EQ(m.result(a.id())["roc"]["auc"], 1.0);
  EXPECT_EQ(m.result(b.id())["roc"]["auc"], 0.0);
}

TEST(StudyManager, PooledRocOverCompletedSessions) {
  StudyManager m(corpus());
  EXPECT_TRUE(m.pooled()["pooled"].is_null());
  Rng rng(9);
  std::vector<std::pair<double, bool>> all;
  for (int k = 0; k < 3; ++k) {
    auto& s = m.create(static_cast<std::uint64_t>(10 + k));
    for (const auto& it : s.items()) m.rate(s.id(), it.item_id, std::uniform_int_distribution<int>(1, 5)(rng), "");
    m.result(s.id());
    for (auto p : s.scored()) all.push_back(p);
  }
  auto& open = m.create(99);
  m.rate(open.id(), open.items()[0].item_id, 5, "");
  const auto p = m.pooled();
  EXPECT_TRUE(validate(p, response_schemas()["study_pooled"]).empty());
  EXPECT_EQ(p["sessions"].size(), 3u);
  EXPECT_EQ(p["pooled"]["positives"], 75);
  EXPECT_NEAR(p["pooled"]["auc"].get<double>(), mann_whitney(all), 1e-12);
}

TEST(StudyManager, ReplaysTheEventLog) {
  const auto dir = tmpdir("replay");
  std::string done, open;
  nlohmann::json done_result;
  {
    StudyManager m(corpus(), dir);
    auto& a = m.create(21);
    for (const auto& it : a.items()) m.rate(a.id(), it.item_id, it.real ? 4 : 2, "key-" + it.item_id);
    done_result = m.result(a.id());
    auto& b = m.create(22);
    for (int i = 0; i < 7; ++i) m.rate(b.id(), b.items()[static_cast<std::size_t>(i)].item_id, 3, "k");
    done = a.id();
    open = b.id();
  }
  StudyManager m(corpus(), dir);
  EXPECT_EQ(m.result(done), done_result);
  auto& b = m.get(open);
  EXPECT_FALSE(b.complete());
  EXPECT_EQ(*b.next_unrated(), 7);
  // Retried submission after restart is still recognised by its key.
  EXPECT_TRUE(m.rate(open, b.items()[0].item_id, 3, "k").duplicate);
  const auto fresh = m.create(21).id();
  EXPECT_NE(fresh, done);
  EXPECT_NE(fresh, open);

  std::ofstream(dir / "zz-broken.jsonl") << R"({"event":"rate","item_id":"item-00","rating":3})" << '\n';
  EXPECT_THROW(StudyManager(corpus(), dir), IntegrityError);
  std::filesystem::remove_all(dir);
}

} // namespace
} // namespace pathgan::service
