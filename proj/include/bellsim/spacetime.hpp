#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace bellsim::spacetime {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s, exact

enum class EventLabel { kEmission, kMeasurementA, kMeasurementB, kChoiceA, kChoiceB, kCustom };

std::string to_string(EventLabel label);

/// Default temporal extents in seconds.
inline constexpr double kEmissionDuration = 1e-9;     // pump coherence time
inline constexpr double kMeasurementDuration = 10e-9;  // APD breakdown
inline constexpr double kChoiceDuration = 1.0 / (2.0 * 30e6);  // QRNG autocorrelation time

/// A labeled event on the 1-D link axis.
///
/// `duration` is the coordinate-time extent in the current frame and
/// `velocity` the velocity of the event's world line in that frame. Events
/// built in the source frame are at rest; boosting keeps the world-line
/// segment a geometric object, which is what makes the padded causal
/// classification frame independent.
struct SpacetimeEvent {
  EventLabel label = EventLabel::kCustom;
  double t = 0.0;         // s
  double x = 0.0;         // m
  double duration = 0.0;  // s
  double velocity = 0.0;  // m/s
  std::string name;

  static SpacetimeEvent make(EventLabel label, double t, double x, double duration = -1.0);
  double proper_duration() const;
};

enum class IntervalKind { kSpaceLike, kTimeLike, kLightLike };

std::string to_string(IntervalKind kind);

struct IntervalClass {
  IntervalKind kind = IntervalKind::kTimeLike;
  double margin = 0.0;  // m; min over padded end points of |dx| - c|dt|
};

struct CausalityOptions {
  double slack = 0.3e-6;         // s, per pair; split evenly between the two events
  double lightlike_tol = 1e-6;   // m
};

/// Classify the separation of two events after widening each by its
/// duration plus half the slack (in the event's proper time, on both sides).
/// SpaceLike iff every end-point pair is space-like by more than the tolerance.
IntervalClass interval_class(const SpacetimeEvent& e1, const SpacetimeEvent& e2, const CausalityOptions& opt = {});

double gamma(double velocity);

/// Lorentz boost into a frame moving with `velocity` (m/s) along +x.
/// Throws Error(kInvalidFrame) if |velocity| >= c.
SpacetimeEvent boost(const SpacetimeEvent& e, double velocity);

/// Velocity of the frame in which both events are simultaneous.
/// Throws Error(kInvalidFrame) unless the events are space-like separated.
double simultaneity_frame(const SpacetimeEvent& e1, const SpacetimeEvent& e2);

/// Geometry of one experiment, all in the source frame.
struct Geometry {
  double link_distance = 143.6e3;        // m, Alice->Bob
  double alice_fiber_delay = 29.6e-6;    // s, source->Alice photon travel
  double bob_flight_delay = 479e-6;      // s, source->Bob photon travel
  double alice_qrng_position = -1.2e3;   // m
  double alice_link_delay = 4.5e-6;      // s, radio link + electronics QRNG_A->Alice
  double alice_electronic_delay = 24.6e-6;
  double bob_qrng_offset = 0.0;          // m, relative to Bob
  double bob_link_delay = 0.0;           // s
  double bob_electronic_delay = 24.6e-6;
  double setting_period = 1e-6;          // s, each setting applies for one period
  double choice_duration = kChoiceDuration;
  double slack = 0.3e-6;
};

/// E, A, B, a, b in the source frame. Choice events are placed so that the
/// setting they produce is active at the matching measurement, centered in
/// its setting interval; their duration covers half a setting period on top
/// of the QRNG autocorrelation time.
/// Throws Error(kConfig) on non-positive geometry or a choice that would
/// occur after its photon arrives.
std::vector<SpacetimeEvent> build_scenario_events(const Geometry& g);

struct PairReport {
  EventLabel first;
  EventLabel second;
  IntervalClass interval;
};

struct LoopholeVerdict {
  bool locality_closed = false;
  bool freedom_closed = false;
  bool settings_stochastic = false;
  std::vector<PairReport> pairs;  // (A,B) (A,b) (B,a) (a,E) (b,E)
};

/// Requires exactly one each of E, A, B, a, b; throws Error(kInput) otherwise.
LoopholeVerdict verdicts(const std::vector<SpacetimeEvent>& events, bool settings_stochastic,
                         const CausalityOptions& opt = {});

/// Human readable event table, pair classes and verdict lines.
std::string format_report(const std::vector<SpacetimeEvent>& events, const LoopholeVerdict& v);

}  // namespace bellsim::spacetime
