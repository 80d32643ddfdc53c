#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "prizegrowth/util.hpp"

namespace prizegrowth {

using Year = int;

// The five matched growth measures, in canonical column order.
inline const std::vector<std::string> kCanonicalMeasures = {
    "publications", "citations", "top_scientist_citations", "incumbents", "new_entrants"};

inline constexpr int kPreWindow = 10;   // years before the event, inclusive of t = 0
inline constexpr int kPostWindow = 10;  // years after the event

// log(y + 1); defined at zero counts and applied identically everywhere a
// log enters the pipeline (distance, gaps, regression outcomes).
inline double growth_transform(double y) { return std::log1p(y); }

struct TopicTrajectory {
  std::string topic_id;
  std::string discipline;
  Year first_year = 0;
  // measure -> yearly values; index k holds year first_year + k. All measures
  // share one contiguous year range.
  std::map<std::string, std::vector<double>> values;

  int n_years() const { return values.empty() ? 0 : static_cast<int>(values.begin()->second.size()); }
  Year last_year() const { return first_year + n_years() - 1; }
  bool covers(Year y) const { return y >= first_year && y <= last_year(); }
  double at(const std::string& measure, Year y) const;
  // full [prize_year - kPreWindow, prize_year] coverage
  bool has_pre_window(Year prize_year) const {
    return covers(prize_year - kPreWindow) && covers(prize_year);
  }
};

struct PrizeEvent {
  std::string topic_id;
  Year prize_year = 0;
  std::optional<double> recency;
  std::optional<double> money;
  std::optional<double> specialty;
  std::optional<double> winner_top;
  std::optional<double> prize_age;
  std::optional<double> conferrals;

  std::optional<double> covariate(const std::string& name) const;
  static const std::vector<std::string>& covariate_names();
};

// 21 event-time slots, t = -10..+10, t = 0 at the event year. Cells past the
// trajectory's horizon are absent; pre-event cells never are.
struct EventWindow {
  static constexpr int t_min = -kPreWindow;
  static constexpr int t_max = kPostWindow;

  std::string topic_id;
  std::string measure;
  Year reference_year = 0;
  std::array<std::optional<double>, 21> cells;

  const std::optional<double>& at(int t) const { return cells[static_cast<std::size_t>(t + kPreWindow)]; }
  std::optional<double>& at(int t) { return cells[static_cast<std::size_t>(t + kPreWindow)]; }
};

// Immutable after construction; reads are safe from concurrent workers.
class Panel {
 public:
  Panel() = default;
  Panel(std::vector<TopicTrajectory> trajectories, std::vector<PrizeEvent> events);

  const TopicTrajectory* find(const std::string& topic_id) const;
  const TopicTrajectory& require(const std::string& topic_id) const;
  bool is_treated(const std::string& topic_id) const { return event_index_.count(topic_id) > 0; }
  const PrizeEvent* event_for(const std::string& topic_id) const;

  const std::vector<TopicTrajectory>& trajectories() const { return trajectories_; }
  const std::vector<PrizeEvent>& events() const { return events_; }
  const std::set<std::string>& disciplines() const { return disciplines_; }
  const std::vector<std::string>& measures() const { return measures_; }
  // sorted, for deterministic iteration
  const std::vector<std::string>& topic_ids() const { return sorted_ids_; }

  std::size_t n_topics() const { return trajectories_.size(); }

 private:
  std::vector<TopicTrajectory> trajectories_;
  std::vector<PrizeEvent> events_;
  std::map<std::string, std::size_t> topic_index_;
  std::map<std::string, std::size_t> event_index_;
  std::set<std::string> disciplines_;
  std::vector<std::string> measures_;  // canonical five first, extras after
  std::vector<std::string> sorted_ids_;
};

Panel load_panel(const std::filesystem::path& trajectory_file,
                 const std::filesystem::path& event_file);

// Canonical CSV serialization (topics sorted by id, years ascending).
// load_panel(save_panel(p)) == p modulo row order of the input.
std::string serialize_trajectories(const Panel& panel);
std::string serialize_events(const Panel& panel);
void save_panel(const Panel& panel, const std::filesystem::path& trajectory_file,
                const std::filesystem::path& event_file);

// Window of `measure` around reference_year. Requires the full pre-window;
// post-event years past the trajectory's end come back absent.
EventWindow align(const Panel& panel, const std::string& topic_id, Year reference_year,
                  const std::string& measure);

}  // namespace prizegrowth
