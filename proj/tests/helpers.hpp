#pragma once

// Small builders shared across the unit tests.

#include <unistd.h>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "prizegrowth/panel.hpp"

namespace testutil {

using namespace prizegrowth;

// trajectory holding the same count in every cell of every canonical measure
inline TopicTrajectory flat_topic(std::string id, std::string disc, Year first, int n_years,
                                  double value) {
  TopicTrajectory tr;
  tr.topic_id = std::move(id);
  tr.discipline = std::move(disc);
  tr.first_year = first;
  for (const auto& m : kCanonicalMeasures)
    tr.values[m] = std::vector<double>(static_cast<std::size_t>(n_years), value);
  return tr;
}

// counts = fn(measure_index, year_index)
template <typename F>
TopicTrajectory topic_from(std::string id, std::string disc, Year first, int n_years, F fn) {
  TopicTrajectory tr;
  tr.topic_id = std::move(id);
  tr.discipline = std::move(disc);
  tr.first_year = first;
  for (std::size_t m = 0; m < kCanonicalMeasures.size(); ++m) {
    auto& v = tr.values[kCanonicalMeasures[m]];
    v.reserve(static_cast<std::size_t>(n_years));
    for (int k = 0; k < n_years; ++k) v.push_back(fn(m, k));
  }
  return tr;
}

inline PrizeEvent bare_event(std::string id, Year prize_year) {
  PrizeEvent e;
  e.topic_id = std::move(id);
  e.prize_year = prize_year;
  return e;
}

inline PrizeEvent full_event(std::string id, Year prize_year, double recency = 10.0,
                             double money = 1.0, double specialty = 0.0, double winner_top = 1.0,
                             double prize_age = 50.0, double conferrals = 3.0) {
  PrizeEvent e = bare_event(std::move(id), prize_year);
  e.recency = recency;
  e.money = money;
  e.specialty = specialty;
  e.winner_top = winner_top;
  e.prize_age = prize_age;
  e.conferrals = conferrals;
  return e;
}

// per-test scratch directory, removed on destruction
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("prizegrowth_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace testutil
