#ifndef KAE_PARALLEL_HPP
#define KAE_PARALLEL_HPP

#include <cstddef>

#include <functional>

namespace kae {

/// Number of workers parallel_for will use: the KAE_THREADS environment
/// variable when set to a positive value, otherwise the hardware concurrency.
unsigned parallel_width();

/// Runs body(i) for every i in [0, n), splitting the range into contiguous
/// blocks over at most parallel_width() threads.  Each index is executed by
/// exactly one worker, so results never depend on the thread count as long as
/// distinct indices touch distinct output slots.  The first exception thrown
/// by any worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace kae

#endif  // KAE_PARALLEL_HPP
