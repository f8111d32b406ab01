#pragma once

#include "imbal/battery_env.hpp"
#include "imbal/market_data.hpp"

namespace imbal {

/// Threshold controller: charge below `lower`, discharge above `upper`,
/// idle on the closed interval between them. State of charge is ignored.
Action rbc_action(double indicative_price, const RbcThresholds& thresholds);

}  // namespace imbal
