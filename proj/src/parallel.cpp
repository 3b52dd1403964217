#include "earlywarn/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace earlywarn {

void set_thread_count(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace earlywarn
