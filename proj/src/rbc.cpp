#include "imbal/rbc.hpp"

#include "imbal/error.hpp"

namespace imbal {

Action rbc_action(double indicative_price, const RbcThresholds& thresholds) {
  if (!(thresholds.lower <= thresholds.upper))
    throw Error(ErrorKind::kInvalidArgument, "rbc thresholds must satisfy lower <= upper");
  if (indicative_price < thresholds.lower) return Action::kCharge;
  if (indicative_price > thresholds.upper) return Action::kDischarge;
  return Action::kIdle;
}

}  // namespace imbal
