#include "bellsim/spacetime.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "bellsim/error.hpp"

namespace bellsim::spacetime {

namespace {

constexpr double c = kSpeedOfLight;

struct Point {
  double t;
  double x;
};

// Half-extent of the padded world-line segment, as a coordinate vector.
Point pad_vector(const SpacetimeEvent& e, double half_slack) {
  const double g = gamma(e.velocity);
  const double tau = e.proper_duration() + half_slack;
  return {g * tau, g * e.velocity * tau};
}

}  // namespace

std::string to_string(EventLabel label) {
  switch (label) {
    case EventLabel::kEmission: return "E";
    case EventLabel::kMeasurementA: return "A";
    case EventLabel::kMeasurementB: return "B";
    case EventLabel::kChoiceA: return "a";
    case EventLabel::kChoiceB: return "b";
    case EventLabel::kCustom: return "custom";
  }
  return "?";
}

std::string to_string(IntervalKind kind) {
  switch (kind) {
    case IntervalKind::kSpaceLike: return "space-like";
    case IntervalKind::kTimeLike: return "time-like";
    case IntervalKind::kLightLike: return "light-like";
  }
  return "?";
}

SpacetimeEvent SpacetimeEvent::make(EventLabel label, double t, double x, double duration) {
  if (duration < 0.0) {
    switch (label) {
      case EventLabel::kEmission: duration = kEmissionDuration; break;
      case EventLabel::kMeasurementA:
      case EventLabel::kMeasurementB: duration = kMeasurementDuration; break;
      case EventLabel::kChoiceA:
      case EventLabel::kChoiceB: duration = kChoiceDuration; break;
      case EventLabel::kCustom: duration = 0.0; break;
    }
  }
  return SpacetimeEvent{label, t, x, duration, 0.0, to_string(label)};
}

double SpacetimeEvent::proper_duration() const { return duration / gamma(velocity); }

double gamma(double velocity) {
  const double beta = velocity / c;
  if (!(std::abs(beta) < 1.0)) fail(ErrorKind::kInvalidFrame, "gamma: |v| >= c");
  if (beta == 0.0) return 1.0;
  return 1.0 / std::sqrt((1.0 - beta) * (1.0 + beta));
}

IntervalClass interval_class(const SpacetimeEvent& e1, const SpacetimeEvent& e2, const CausalityOptions& opt) {
  const Point p1 = pad_vector(e1, 0.5 * opt.slack);
  const Point p2 = pad_vector(e2, 0.5 * opt.slack);
  const double dt0 = e2.t - e1.t;
  const double dx0 = e2.x - e1.x;

  double min_margin = std::numeric_limits<double>::infinity();
  double max_margin = -std::numeric_limits<double>::infinity();
  for (int s1 : {-1, 1}) {
    for (int s2 : {-1, 1}) {
      const double dt = dt0 + s2 * p2.t - s1 * p1.t;
      const double dx = dx0 + s2 * p2.x - s1 * p1.x;
      const double m = std::abs(dx) - c * std::abs(dt);
      min_margin = std::min(min_margin, m);
      max_margin = std::max(max_margin, m);
    }
  }
  IntervalClass out;
  out.margin = min_margin;
  if (min_margin > opt.lightlike_tol) {
    out.kind = IntervalKind::kSpaceLike;
  } else if (max_margin < -opt.lightlike_tol) {
    out.kind = IntervalKind::kTimeLike;
  } else {
    out.kind = IntervalKind::kLightLike;
  }
  return out;
}

SpacetimeEvent boost(const SpacetimeEvent& e, double velocity) {
  if (!(std::abs(velocity) < c)) fail(ErrorKind::kInvalidFrame, "boost: |v| >= c");
  const double g = gamma(velocity);
  SpacetimeEvent out = e;
  out.t = g * (e.t - velocity * e.x / (c * c));
  out.x = g * (e.x - velocity * e.t);
  const double doppler = 1.0 - velocity * e.velocity / (c * c);
  out.duration = g * e.duration * doppler;
  out.velocity = (e.velocity - velocity) / doppler;
  return out;
}

double simultaneity_frame(const SpacetimeEvent& e1, const SpacetimeEvent& e2) {
  const double dt = e2.t - e1.t;
  const double dx = e2.x - e1.x;
  if (!(std::abs(dx) - c * std::abs(dt) > CausalityOptions{}.lightlike_tol)) {
    fail(ErrorKind::kInvalidFrame, "simultaneity_frame: events are not space-like separated");
  }
  return c * c * dt / dx;
}

std::vector<SpacetimeEvent> build_scenario_events(const Geometry& g) {
  if (!(g.link_distance > 0.0) || !(g.alice_fiber_delay > 0.0) || !(g.bob_flight_delay > 0.0)) {
    fail(ErrorKind::kConfig, "geometry: link distance and photon delays must be positive");
  }
  if (g.alice_link_delay < 0.0 || g.alice_electronic_delay < 0.0 || g.bob_link_delay < 0.0 ||
      g.bob_electronic_delay < 0.0 || !(g.setting_period > 0.0) || g.choice_duration < 0.0 || g.slack < 0.0) {
    fail(ErrorKind::kConfig, "geometry: delays, durations and slack must be non-negative");
  }
  const double half_period = 0.5 * g.setting_period;
  const double choice_width = g.choice_duration + half_period;

  const auto emission = SpacetimeEvent::make(EventLabel::kEmission, 0.0, 0.0);
  const auto meas_a = SpacetimeEvent::make(EventLabel::kMeasurementA, g.alice_fiber_delay, 0.0);
  const auto meas_b = SpacetimeEvent::make(EventLabel::kMeasurementB, g.bob_flight_delay, g.link_distance);
  const double t_choice_a = g.alice_fiber_delay - g.alice_link_delay - g.alice_electronic_delay - half_period;
  const double t_choice_b = g.bob_flight_delay - g.bob_link_delay - g.bob_electronic_delay - half_period;
  const auto choice_a = SpacetimeEvent::make(EventLabel::kChoiceA, t_choice_a, g.alice_qrng_position, choice_width);
  const auto choice_b =
      SpacetimeEvent::make(EventLabel::kChoiceB, t_choice_b, g.link_distance + g.bob_qrng_offset, choice_width);

  if (choice_a.t > meas_a.t || choice_b.t > meas_b.t) {
    fail(ErrorKind::kConfig, "geometry: setting choice would occur after the photon arrives");
  }
  return {emission, meas_a, meas_b, choice_a, choice_b};
}

LoopholeVerdict verdicts(const std::vector<SpacetimeEvent>& events, bool settings_stochastic,
                         const CausalityOptions& opt) {
  std::map<EventLabel, const SpacetimeEvent*> by_label;
  for (const auto& e : events) {
    if (e.label == EventLabel::kCustom) continue;
    if (!by_label.emplace(e.label, &e).second) {
      fail(ErrorKind::kInput, "verdicts: duplicate event " + to_string(e.label));
    }
  }
  for (auto label : {EventLabel::kEmission, EventLabel::kMeasurementA, EventLabel::kMeasurementB,
                     EventLabel::kChoiceA, EventLabel::kChoiceB}) {
    if (!by_label.count(label)) fail(ErrorKind::kInput, "verdicts: missing event " + to_string(label));
  }

  LoopholeVerdict v;
  v.settings_stochastic = settings_stochastic;
  auto add = [&](EventLabel l1, EventLabel l2) {
    const auto ic = interval_class(*by_label[l1], *by_label[l2], opt);
    v.pairs.push_back({l1, l2, ic});
    return ic.kind == IntervalKind::kSpaceLike;
  };
  const bool ab = add(EventLabel::kMeasurementA, EventLabel::kMeasurementB);
  const bool a_cb = add(EventLabel::kMeasurementA, EventLabel::kChoiceB);
  const bool b_ca = add(EventLabel::kMeasurementB, EventLabel::kChoiceA);
  const bool ca_e = add(EventLabel::kChoiceA, EventLabel::kEmission);
  const bool cb_e = add(EventLabel::kChoiceB, EventLabel::kEmission);

  // Deterministic settings are fixed arbitrarily far in the past: nothing closes.
  v.locality_closed = settings_stochastic && ab && a_cb && b_ca;
  v.freedom_closed = settings_stochastic && ca_e && cb_e;
  return v;
}

std::string format_report(const std::vector<SpacetimeEvent>& events, const LoopholeVerdict& v) {
  std::ostringstream os;
  os << std::fixed;
  os << "event,t_us,x_km,duration_ns\n";
  for (const auto& e : events) {
    os << e.name << ',' << std::setprecision(4) << e.t * 1e6 << ',' << e.x * 1e-3 << ',' << std::setprecision(2)
       << e.duration * 1e9 << '\n';
  }
  os << "\npair,class,margin_m\n";
  for (const auto& p : v.pairs) {
    os << '(' << to_string(p.first) << ' ' << to_string(p.second) << ")," << to_string(p.interval.kind) << ','
       << std::setprecision(1) << p.interval.margin << '\n';
  }
  os << "\nsettings: " << (v.settings_stochastic ? "stochastic" : "deterministic") << '\n';
  os << "locality: " << (v.locality_closed ? "CLOSED" : "OPEN")
     << ", freedom-of-choice: " << (v.freedom_closed ? "CLOSED" : "OPEN") << '\n';
  return os.str();
}

}  // namespace bellsim::spacetime
