#pragma once

#include <ctime>

namespace proxskip {

/// CPU time consumed by the calling thread, in seconds. Equal to the process
/// CPU time for single-threaded runs, and unaffected by sibling workers.
inline double thread_cpu_seconds()
{
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

} // namespace proxskip
