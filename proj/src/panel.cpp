#include "prizegrowth/panel.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace prizegrowth {

namespace {

CsvTable read_csv(const std::filesystem::path& path) {
  return parse_csv(read_file(path), path.string());
}

}  // namespace

double TopicTrajectory::at(const std::string& measure, Year y) const {
  auto it = values.find(measure);
  if (it == values.end())
    throw InputError("topic " + topic_id + ": unknown measure '" + measure + "'");
  if (!covers(y))
    throw InputError("topic " + topic_id + ": year " + std::to_string(y) + " out of range [" +
                     std::to_string(first_year) + ", " + std::to_string(last_year()) + "]");
  return it->second[static_cast<std::size_t>(y - first_year)];
}

const std::vector<std::string>& PrizeEvent::covariate_names() {
  static const std::vector<std::string> names = {"recency",    "money",     "specialty",
                                                 "winner_top", "prize_age", "conferrals"};
  return names;
}

std::optional<double> PrizeEvent::covariate(const std::string& name) const {
  if (name == "recency") return recency;
  if (name == "money") return money;
  if (name == "specialty") return specialty;
  if (name == "winner_top") return winner_top;
  if (name == "prize_age") return prize_age;
  if (name == "conferrals") return conferrals;
  throw InputError("unknown event covariate '" + name + "'");
}

Panel::Panel(std::vector<TopicTrajectory> trajectories, std::vector<PrizeEvent> events)
    : trajectories_(std::move(trajectories)), events_(std::move(events)) {
  if (trajectories_.empty()) throw InputError("panel has no trajectories");

  // all topics carry the same measure columns, canonical five required
  std::set<std::string> measure_set;
  for (const auto& m : kCanonicalMeasures) measure_set.insert(m);
  for (const auto& [m, v] : trajectories_.front().values) measure_set.insert(m);
  for (const auto& tr : trajectories_) {
    for (const auto& m : kCanonicalMeasures)
      if (!tr.values.count(m))
        throw InputError("topic " + tr.topic_id + ": missing canonical measure '" + m + "'");
    if (tr.values.size() != measure_set.size())
      throw InputError("topic " + tr.topic_id + ": measure columns differ from other topics");
    std::size_t ny = 0;
    for (const auto& [m, v] : tr.values) {
      if (!measure_set.count(m))
        throw InputError("topic " + tr.topic_id + ": measure columns differ from other topics");
      if (ny == 0) ny = v.size();
      if (v.size() != ny)
        throw InputError("topic " + tr.topic_id + ": ragged measure '" + m + "'");
      for (double y : v)
        if (y < 0.0)
          throw InputError("topic " + tr.topic_id + ": negative count in measure '" + m + "'");
    }
    if (ny == 0) throw InputError("topic " + tr.topic_id + ": no yearly data");
  }

  measures_.assign(kCanonicalMeasures.begin(), kCanonicalMeasures.end());
  for (const auto& m : measure_set)
    if (std::find(measures_.begin(), measures_.end(), m) == measures_.end())
      measures_.push_back(m);

  for (std::size_t i = 0; i < trajectories_.size(); ++i) {
    const auto& tr = trajectories_[i];
    if (!topic_index_.emplace(tr.topic_id, i).second)
      throw InputError("duplicate topic_id '" + tr.topic_id + "'");
    disciplines_.insert(tr.discipline);
    sorted_ids_.push_back(tr.topic_id);
  }
  std::sort(sorted_ids_.begin(), sorted_ids_.end());

  for (std::size_t i = 0; i < events_.size(); ++i) {
    const auto& ev = events_[i];
    auto it = topic_index_.find(ev.topic_id);
    if (it == topic_index_.end())
      throw InputError("event references unknown topic '" + ev.topic_id + "'");
    if (!event_index_.emplace(ev.topic_id, i).second)
      throw InputError("topic '" + ev.topic_id + "' has more than one event");
    const auto& tr = trajectories_[it->second];
    if (ev.prize_year - kPreWindow < tr.first_year)
      throw InputError("insufficient pre-window for topic '" + ev.topic_id + "': prize year " +
                       std::to_string(ev.prize_year) + " needs data from " +
                       std::to_string(ev.prize_year - kPreWindow) + " but trajectory starts " +
                       std::to_string(tr.first_year));
    if (ev.prize_year + 1 > tr.last_year())
      throw InputError("topic '" + ev.topic_id + "': prize year " + std::to_string(ev.prize_year) +
                       " must precede the trajectory's last year " +
                       std::to_string(tr.last_year()));
  }
}

const TopicTrajectory* Panel::find(const std::string& topic_id) const {
  auto it = topic_index_.find(topic_id);
  return it == topic_index_.end() ? nullptr : &trajectories_[it->second];
}

const TopicTrajectory& Panel::require(const std::string& topic_id) const {
  const auto* t = find(topic_id);
  if (!t) throw InputError("unknown topic '" + topic_id + "'");
  return *t;
}

const PrizeEvent* Panel::event_for(const std::string& topic_id) const {
  auto it = event_index_.find(topic_id);
  return it == event_index_.end() ? nullptr : &events_[it->second];
}

Panel load_panel(const std::filesystem::path& trajectory_file,
                 const std::filesystem::path& event_file) {
  CsvTable traj = read_csv(trajectory_file);
  const auto& h = traj.header;
  if (h.size() < 3 || h[0] != "topic_id" || h[1] != "discipline" || h[2] != "year")
    throw InputError(trajectory_file.string() +
                     ": header must start with topic_id,discipline,year");
  std::vector<std::string> measure_cols(h.begin() + 3, h.end());
  for (const auto& m : kCanonicalMeasures)
    if (std::find(measure_cols.begin(), measure_cols.end(), m) == measure_cols.end())
      throw InputError(trajectory_file.string() + ": missing measure column '" + m + "'");

  // topic -> year -> row of measure values
  struct Raw {
    std::string discipline;
    std::map<Year, std::vector<double>> rows;
  };
  std::map<std::string, Raw> by_topic;
  for (std::size_t r = 0; r < traj.rows.size(); ++r) {
    const auto& row = traj.rows[r];
    std::string where = trajectory_file.string() + " row " + std::to_string(r + 2);
    const std::string& id = row[0];
    if (id.empty()) throw InputError("empty topic_id at " + where);
    Year year = static_cast<Year>(parse_number(row[2], where + " column year"));
    auto& raw = by_topic[id];
    if (raw.rows.empty())
      raw.discipline = row[1];
    else if (raw.discipline != row[1])
      throw InputError("topic " + id + ": inconsistent discipline at " + where);
    std::vector<double> vals;
    vals.reserve(measure_cols.size());
    for (std::size_t c = 3; c < row.size(); ++c) {
      double v = parse_number(row[c], where + " column " + h[c]);
      if (v < 0.0)
        throw InputError("negative count at " + where + " column " + h[c]);
      vals.push_back(v);
    }
    if (!raw.rows.emplace(year, std::move(vals)).second)
      throw InputError("duplicate (topic_id, year) = (" + id + ", " + std::to_string(year) +
                       ") at " + where);
  }

  std::vector<TopicTrajectory> trajectories;
  trajectories.reserve(by_topic.size());
  for (auto& [id, raw] : by_topic) {
    TopicTrajectory tr;
    tr.topic_id = id;
    tr.discipline = raw.discipline;
    tr.first_year = raw.rows.begin()->first;
    Year expect = tr.first_year;
    for (const auto& [year, vals] : raw.rows) {
      if (year != expect)
        throw InputError("topic " + id + ": year gap, expected " + std::to_string(expect) +
                         " but found " + std::to_string(year));
      ++expect;
    }
    for (std::size_t c = 0; c < measure_cols.size(); ++c) {
      auto& series = tr.values[measure_cols[c]];
      series.reserve(raw.rows.size());
      for (const auto& [year, vals] : raw.rows) series.push_back(vals[c]);
    }
    trajectories.push_back(std::move(tr));
  }

  CsvTable evt = read_csv(event_file);
  const std::vector<std::string> expect_evt = {"topic_id",   "prize_year", "recency",
                                               "money",      "specialty",  "winner_top",
                                               "prize_age",  "conferrals"};
  if (evt.header != expect_evt)
    throw InputError(event_file.string() +
                     ": header must be topic_id,prize_year,recency,money,specialty,winner_top,"
                     "prize_age,conferrals");
  std::vector<PrizeEvent> events;
  for (std::size_t r = 0; r < evt.rows.size(); ++r) {
    const auto& row = evt.rows[r];
    std::string where = event_file.string() + " row " + std::to_string(r + 2);
    PrizeEvent ev;
    ev.topic_id = row[0];
    ev.prize_year = static_cast<Year>(parse_number(row[1], where + " column prize_year"));
    auto opt = [&](std::size_t c) -> std::optional<double> {
      if (row[c].empty()) return std::nullopt;
      return parse_number(row[c], where + " column " + evt.header[c]);
    };
    ev.recency = opt(2);
    ev.money = opt(3);
    ev.specialty = opt(4);
    ev.winner_top = opt(5);
    ev.prize_age = opt(6);
    ev.conferrals = opt(7);
    for (const auto& name : {"money", "specialty", "winner_top"}) {
      auto v = ev.covariate(name);
      if (v && *v != 0.0 && *v != 1.0)
        throw InputError("binary flag " + std::string(name) + " must be 0 or 1 at " + where);
    }
    if (ev.prize_age && *ev.prize_age < 0.0)
      throw InputError("prize_age must be >= 0 at " + where);
    if (ev.conferrals && *ev.conferrals < 0.0)
      throw InputError("conferrals must be >= 0 at " + where);
    events.push_back(std::move(ev));
  }

  return Panel(std::move(trajectories), std::move(events));
}

std::string serialize_trajectories(const Panel& panel) {
  std::ostringstream out;
  out << "topic_id,discipline,year";
  for (const auto& m : panel.measures()) out << ',' << m;
  out << '\n';
  for (const auto& id : panel.topic_ids()) {
    const auto& tr = *panel.find(id);
    for (int k = 0; k < tr.n_years(); ++k) {
      out << tr.topic_id << ',' << tr.discipline << ',' << (tr.first_year + k);
      for (const auto& m : panel.measures())
        out << ',' << format_double(tr.values.at(m)[static_cast<std::size_t>(k)]);
      out << '\n';
    }
  }
  return out.str();
}

std::string serialize_events(const Panel& panel) {
  std::ostringstream out;
  out << "topic_id,prize_year,recency,money,specialty,winner_top,prize_age,conferrals\n";
  std::vector<const PrizeEvent*> evs;
  for (const auto& ev : panel.events()) evs.push_back(&ev);
  std::sort(evs.begin(), evs.end(),
            [](const PrizeEvent* a, const PrizeEvent* b) { return a->topic_id < b->topic_id; });
  auto cell = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const auto* ev : evs) {
    out << ev->topic_id << ',' << ev->prize_year << ',' << cell(ev->recency) << ','
        << cell(ev->money) << ',' << cell(ev->specialty) << ',' << cell(ev->winner_top) << ','
        << cell(ev->prize_age) << ',' << cell(ev->conferrals) << '\n';
  }
  return out.str();
}

void save_panel(const Panel& panel, const std::filesystem::path& trajectory_file,
                const std::filesystem::path& event_file) {
  atomic_write(trajectory_file, serialize_trajectories(panel));
  atomic_write(event_file, serialize_events(panel));
}

EventWindow align(const Panel& panel, const std::string& topic_id, Year reference_year,
                  const std::string& measure) {
  const auto& tr = panel.require(topic_id);
  if (!tr.has_pre_window(reference_year))
    throw InputError("topic '" + topic_id + "': missing pre-window years for reference year " +
                     std::to_string(reference_year));
  EventWindow w;
  w.topic_id = topic_id;
  w.measure = measure;
  w.reference_year = reference_year;
  for (int t = EventWindow::t_min; t <= EventWindow::t_max; ++t) {
    Year y = reference_year + t;
    if (tr.covers(y)) w.at(t) = tr.at(measure, y);
  }
  return w;
}

}  // namespace prizegrowth
