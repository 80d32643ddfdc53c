#include <doctest.h>

#include <string>
#include <vector>

#include "helpers.hpp"
#include "prizegrowth/panel.hpp"
#include "prizegrowth/util.hpp"

using namespace prizegrowth;
using namespace testutil;

TEST_CASE("growth transform is log1p") {
  CHECK(growth_transform(0.0) == 0.0);
  CHECK(growth_transform(99.0) == doctest::Approx(4.605170185988092).epsilon(1e-15));
}

TEST_CASE("panel construction validates shape and events") {
  std::vector<TopicTrajectory> ts;
  ts.push_back(flat_topic("t0", "phys", 1980, 31, 5.0));
  ts.push_back(flat_topic("t1", "phys", 1980, 31, 6.0));
  Panel p(ts, {bare_event("t0", 1995)});
  CHECK(p.n_topics() == 2);
  CHECK(p.is_treated("t0"));
  CHECK(!p.is_treated("t1"));
  CHECK(p.event_for("t0")->prize_year == 1995);
  CHECK(p.event_for("t1") == nullptr);
  CHECK(p.disciplines().size() == 1);
  CHECK(p.measures() == kCanonicalMeasures);
  CHECK(p.topic_ids() == std::vector<std::string>{"t0", "t1"});
  CHECK(p.require("t1").at("publications", 1990) == 6.0);
  CHECK_THROWS_AS(p.require("nope"), InputError);
  CHECK_THROWS_AS(p.require("t1").at("publications", 2050), InputError);
  CHECK_THROWS_AS(p.require("t1").at("nope", 1990), InputError);

  CHECK_THROWS_AS(Panel({}, {}), InputError);
  // duplicate topic ids
  CHECK_THROWS_AS(Panel({flat_topic("a", "d", 1980, 20, 1.0), flat_topic("a", "d", 1980, 20, 1.0)},
                        {}),
                  InputError);
  // event for an unknown topic
  CHECK_THROWS_AS(Panel({flat_topic("a", "d", 1980, 20, 1.0)}, {bare_event("zz", 1995)}),
                  InputError);
  // two events on one topic
  CHECK_THROWS_AS(Panel({flat_topic("a", "d", 1980, 31, 1.0)},
                        {bare_event("a", 1995), bare_event("a", 1996)}),
                  InputError);
  // pre-window starts before the trajectory
  CHECK_THROWS_AS(Panel({flat_topic("a", "d", 1990, 31, 1.0)}, {bare_event("a", 1995)}),
                  InputError);
  // no post-event year at all
  CHECK_THROWS_AS(Panel({flat_topic("a", "d", 1980, 16, 1.0)}, {bare_event("a", 1995)}),
                  InputError);
  // missing canonical measure
  TopicTrajectory bad = flat_topic("a", "d", 1980, 20, 1.0);
  bad.values.erase("citations");
  CHECK_THROWS_AS(Panel({bad}, {}), InputError);
  // ragged measure lengths
  TopicTrajectory ragged = flat_topic("a", "d", 1980, 20, 1.0);
  ragged.values["citations"].pop_back();
  CHECK_THROWS_AS(Panel({ragged}, {}), InputError);
  // negative count
  TopicTrajectory neg = flat_topic("a", "d", 1980, 20, 1.0);
  neg.values["publications"][3] = -1.0;
  CHECK_THROWS_AS(Panel({neg}, {}), InputError);
}

TEST_CASE("extra measure columns ride along after the canonical five") {
  TopicTrajectory tr = flat_topic("t0", "phys", 1980, 20, 2.0);
  tr.values["patents"] = std::vector<double>(20, 1.0);
  Panel p({tr}, {});
  CHECK(p.measures().size() == 6);
  CHECK(p.measures().back() == "patents");
  // every topic must carry the same columns
  CHECK_THROWS_AS(Panel({tr, flat_topic("t1", "phys", 1980, 20, 2.0)}, {}), InputError);
}

TEST_CASE("panel csv round trip") {
  TempDir dir("panel_rt");
  std::vector<TopicTrajectory> ts;
  ts.push_back(topic_from("tA", "phys", 1980, 31,
                          [](std::size_t m, int k) { return 5.0 + 2.0 * m + 0.5 * k; }));
  ts.push_back(flat_topic("tB", "phys", 1982, 29, 7.25));
  Panel p(ts, {full_event("tA", 1995, 12.5, 1.0, 0.0, 1.0, 55.0, 2.0)});

  auto tf = dir.path / "traj.csv";
  auto ef = dir.path / "events.csv";
  save_panel(p, tf, ef);
  Panel q = load_panel(tf, ef);

  CHECK(serialize_trajectories(q) == serialize_trajectories(p));
  CHECK(serialize_events(q) == serialize_events(p));
  CHECK(q.n_topics() == 2);
  CHECK(q.require("tA").at("citations", 1985) == doctest::Approx(9.5).epsilon(1e-15));
  CHECK(q.event_for("tA")->recency == 12.5);
  CHECK(q.event_for("tA")->conferrals == 2.0);
}

TEST_CASE("optional event covariates survive the round trip as absent") {
  TempDir dir("panel_opt");
  PrizeEvent e = bare_event("tA", 1995);
  e.money = 1.0;  // only one covariate present
  Panel p({flat_topic("tA", "phys", 1980, 31, 3.0)}, {e});
  save_panel(p, dir.path / "t.csv", dir.path / "e.csv");
  Panel q = load_panel(dir.path / "t.csv", dir.path / "e.csv");
  const auto* ev = q.event_for("tA");
  CHECK(ev->money == 1.0);
  CHECK(!ev->recency.has_value());
  CHECK(!ev->conferrals.has_value());
}

TEST_CASE("load_panel rejects malformed input") {
  TempDir dir("panel_bad");
  auto write = [&](const std::string& name, const std::string& text) {
    atomic_write(dir.path / name, text);
    return dir.path / name;
  };
  auto good_events = write("e.csv",
                           "topic_id,prize_year,recency,money,specialty,winner_top,prize_age,"
                           "conferrals\n");

  // wrong trajectory header
  auto t1 = write("t1.csv", "id,discipline,year,publications\nx,d,1980,1\n");
  CHECK_THROWS_AS(load_panel(t1, good_events), InputError);

  // missing canonical measure column
  auto t2 = write("t2.csv", "topic_id,discipline,year,publications\nx,d,1980,1\n");
  CHECK_THROWS_AS(load_panel(t2, good_events), InputError);

  std::string head =
      "topic_id,discipline,year,publications,citations,top_scientist_citations,incumbents,"
      "new_entrants\n";

  // year gap
  auto t3 = write("t3.csv", head + "x,d,1980,1,1,1,1,1\nx,d,1982,1,1,1,1,1\n");
  CHECK_THROWS_AS(load_panel(t3, good_events), InputError);

  // duplicate (topic, year)
  auto t4 = write("t4.csv", head + "x,d,1980,1,1,1,1,1\nx,d,1980,2,2,2,2,2\n");
  CHECK_THROWS_AS(load_panel(t4, good_events), InputError);

  // inconsistent discipline
  auto t5 = write("t5.csv", head + "x,d,1980,1,1,1,1,1\nx,e,1981,1,1,1,1,1\n");
  CHECK_THROWS_AS(load_panel(t5, good_events), InputError);

  // unparsable number
  auto t6 = write("t6.csv", head + "x,d,1980,one,1,1,1,1\n");
  CHECK_THROWS_AS(load_panel(t6, good_events), InputError);

  // negative count
  auto t7 = write("t7.csv", head + "x,d,1980,-3,1,1,1,1\n");
  CHECK_THROWS_AS(load_panel(t7, good_events), InputError);

  auto good_traj = write("tg.csv", head + "x,d,1980,1,1,1,1,1\n");

  // wrong event header
  auto e1 = write("e1.csv", "topic_id,prize_year\nx,1990\n");
  CHECK_THROWS_AS(load_panel(good_traj, e1), InputError);

  // non-binary flag
  auto e2 = write("e2.csv",
                  "topic_id,prize_year,recency,money,specialty,winner_top,prize_age,conferrals\n"
                  "x,1990,1,0.5,,,,\n");
  CHECK_THROWS_AS(load_panel(good_traj, e2), InputError);

  // ragged row width
  auto t8 = write("t8.csv", head + "x,d,1980,1,1,1\n");
  CHECK_THROWS_AS(load_panel(t8, good_events), InputError);

  CHECK_THROWS_AS(load_panel(dir.path / "absent.csv", good_events), InputError);
}

TEST_CASE("align builds the 21-cell event window") {
  // 1980..2000, prize year 1995: t = +5 is the last covered cell
  Panel p({topic_from("tA", "phys", 1980, 21,
                      [](std::size_t, int k) { return static_cast<double>(k); })},
          {});
  EventWindow w = align(p, "tA", 1995, "publications");
  CHECK(w.at(-10).has_value());
  CHECK(*w.at(-10) == 5.0);   // 1985 is index 5
  CHECK(*w.at(0) == 15.0);
  CHECK(*w.at(5) == 20.0);
  CHECK(!w.at(6).has_value());
  CHECK(!w.at(10).has_value());
  // missing pre-window
  CHECK_THROWS_AS(align(p, "tA", 1989, "publications"), InputError);
  CHECK_THROWS_AS(align(p, "nope", 1995, "publications"), InputError);
}
