#pragma once

#include <cstddef>
#include <functional>

namespace fibergap {

// Worker cap used by every parallel loop in the library. Output never
// depends on it: each index writes its own slot and reductions are done
// afterwards in index order.
void set_worker_count(unsigned workers);
unsigned worker_count();

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace fibergap
