#pragma once

// Self-contained gradient audit, runnable from the CLI. Each item compares
// one backward pass against central finite differences in double precision.

#include <cstdint>
#include <string>
#include <vector>

namespace xing {

struct GradCheckItem {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Per-operation checks plus a composite generator/discriminator objective
// probed at randomly chosen parameter coordinates.
std::vector<GradCheckItem> run_gradient_suite(std::uint64_t seed = 99);

bool all_pass(const std::vector<GradCheckItem>& items);

}  // namespace xing
