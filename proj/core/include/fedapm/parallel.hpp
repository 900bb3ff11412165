#pragma once

#include <functional>

namespace fedapm {

// Worker count from FEDAPM_WORKERS, defaulting to 1; values < 1 are treated as 1.
int workers_from_env();

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index runs exactly once;
// results must not depend on which thread runs an index. The exception thrown by the
// lowest failing index is rethrown after all workers finish.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace fedapm
