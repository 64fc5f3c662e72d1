#pragma once

#include "mfc/common.hpp"

namespace mfc {

/// Exact long-run analysis of a finite Markov chain with stage costs.
///
/// gains[s] is the Cesaro limit of the expected time-averaged cost from start
/// s: the stationary average on each closed communicating class, propagated
/// to transient states through absorption probabilities. bias[s] is the
/// relative value (total transient excess cost), normalized to stationary
/// mean zero on each closed class.
struct ChainAnalysis {
    Vec gains;
    Vec bias;
    bool multichain = false;  // more than one closed class
};

/// `transition` holds dense rows; entries below 1e-14 are treated as
/// structural zeros when classifying states.
ChainAnalysis analyze_chain(const Mat& transition, const Vec& cost);

}  // namespace mfc
