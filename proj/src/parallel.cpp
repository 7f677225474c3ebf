#include "prnet/parallel.hpp"

#include <Eigen/Core>

#include "prnet/error.hpp"

namespace prnet {

void set_num_threads(int threads) {
  if (threads < 1) throw Error(ErrorKind::usage, "set_num_threads", "thread count must be >= 1");
  Eigen::setNbThreads(threads);
}

int num_threads() { return Eigen::nbThreads(); }

}  // namespace prnet
