// Shared scenario builders for the unit and acceptance suites.
#pragma once

#include <cstdint>
#include <vector>

#include "ranging/airlink.hpp"
#include "ranging/subspace.hpp"

namespace helpers {

inline ranging::UserTruth user_with_channel(const ranging::RangingPlan& plan, int code, int theta,
                                            double eps, std::uint64_t channel_stream,
                                            std::uint64_t seed = 0xA17) {
    ranging::UserTruth u;
    u.code_index = code;
    u.theta = theta;
    u.epsilon = eps;
    u.taps = ranging::draw_channel(
        ranging::ChannelProfile::exponential(plan.l, plan.channel_decay),
        ranging::SeededStream{seed, channel_stream});
    return u;
}

inline ranging::SubchannelObservation observe(const std::vector<ranging::UserTruth>& users,
                                              const ranging::RangingPlan& plan, int r,
                                              double noise_var, std::uint64_t noise_stream,
                                              std::uint64_t seed = 0xBEA7) {
    const ranging::ComplexVector rx = ranging::synthesize_uplink(
        users, plan, r, noise_var, ranging::SeededStream{seed, noise_stream});
    return ranging::receiver_frontend(rx, plan, r);
}

inline ranging::CfoSearch search_for(double omega_max) {
    ranging::CfoSearch s;
    s.eps_bound = 1.5 * omega_max;
    s.eps_step = 2e-4;
    s.refine = true;
    return s;
}

} // namespace helpers
