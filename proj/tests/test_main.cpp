#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cblas.h>

int main(int argc, char** argv) {
    // Single BLAS thread keeps summation order fixed across runs.
    openblas_set_num_threads(1);
    return doctest::Context(argc, argv).run();
}
