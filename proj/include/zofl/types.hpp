#pragma once

#include <string>
#include <string_view>

#include "error.hpp"

namespace zofl {

// Randomization used by the gradient estimators.
enum class Scheme { L1, L2 };

enum class Feedback { OnePoint, TwoPoint };

enum class Algorithm { MbASGD, SmASGD, LocalACSA, FedAc, MbSMP, SmSMP };

inline std::string to_string(Scheme s) { return s == Scheme::L1 ? "L1" : "L2"; }

inline std::string to_string(Feedback f) {
  return f == Feedback::OnePoint ? "OnePoint" : "TwoPoint";
}

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::MbASGD: return "MbASGD";
    case Algorithm::SmASGD: return "SmASGD";
    case Algorithm::LocalACSA: return "LocalACSA";
    case Algorithm::FedAc: return "FedAc";
    case Algorithm::MbSMP: return "MbSMP";
    case Algorithm::SmSMP: return "SmSMP";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "L1" || s == "l1") return Scheme::L1;
  if (s == "L2" || s == "l2") return Scheme::L2;
  throw config_error("unknown scheme '" + std::string(s) + "'");
}

inline Feedback parse_feedback(std::string_view s) {
  if (s == "OnePoint" || s == "one-point" || s == "one_point") return Feedback::OnePoint;
  if (s == "TwoPoint" || s == "two-point" || s == "two_point") return Feedback::TwoPoint;
  throw config_error("unknown feedback '" + std::string(s) + "'");
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (auto a : {Algorithm::MbASGD, Algorithm::SmASGD, Algorithm::LocalACSA,
                 Algorithm::FedAc, Algorithm::MbSMP, Algorithm::SmSMP}) {
    if (s == to_string(a)) return a;
  }
  throw config_error("unknown algorithm '" + std::string(s) + "'");
}

inline bool is_smp(Algorithm a) { return a == Algorithm::MbSMP || a == Algorithm::SmSMP; }

}  // namespace zofl
