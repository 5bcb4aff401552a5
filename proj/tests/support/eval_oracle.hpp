#pragma once

// Hand-computed scores for tests/fixtures/{events5,predictions5}.jsonl.
//
//   E1 values A2 B1,      p .6 .4     -> A; hard 1, soft .6, brier (.4^2+.4^2)/2 = .16
//   E2 values A10 B30 C20, p .5 .3 .2 -> A (worst); hard 0, nu = 0,1,.5, soft .3+.1 = .4,
//                                       brier (.5^2+.7^2+.2^2)/3 = .26
//   E3 values A-5 B5,     p .3 .7     -> B; hard 1, soft .7, brier (.3^2+.3^2)/2 = .09
//   E4 values A1 B3 C3,   p .2 .2 .4  -> p~ .25 .25 .5 -> C; hard 1, soft .75,
//                                       y = 0 .5 .5, brier (.0625+.0625+0)/3 = 1/24
//   E5 values A0 B4,      p .5 .5     -> tie, A by order; hard 0, soft .5, brier .25

namespace spr::testing {

struct EventOracle {
  const char* id;
  double accuracy, hard, soft, brier;
  bool tie;
};

inline constexpr EventOracle kFiveEvents[] = {
    {"E1", 1, 1, 0.6, 0.16, false},
    {"E2", 0, 0, 0.4, 0.78 / 3, false},
    {"E3", 1, 1, 0.7, 0.09, false},
    {"E4", 1, 1, 0.75, 1.0 / 24, false},
    {"E5", 0, 0, 0.5, 0.25, true},
};

inline constexpr double kFiveAccuracy = 3.0 / 5;
inline constexpr double kFiveHard = 3.0 / 5;
inline constexpr double kFiveSoft = (0.6 + 0.4 + 0.7 + 0.75 + 0.5) / 5;
inline constexpr double kFiveBrier = (0.16 + 0.78 / 3 + 0.09 + 1.0 / 24 + 0.25) / 5;

}  // namespace spr::testing
