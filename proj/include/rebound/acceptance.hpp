#pragma once

#include <iosfwd>

namespace rebound {

struct AcceptanceOptions {
  // Test hook: pretends the dissipation ledger is miscounted so the energy
  // check must fail; exercises the failure exit path end to end.
  bool inject_energy_fault = false;
};

struct AcceptanceOutcome {
  int passed = 0;
  int failed = 0;
  bool all_pass() const { return failed == 0; }
};

// Runs the full property suite, printing one PASS/FAIL line per criterion.
AcceptanceOutcome run_acceptance(std::ostream& out,
                                 const AcceptanceOptions& opts = {});

}  // namespace rebound
