#pragma once

#include <string>

#include "doctest.h"

#include "fixtures.hpp"
#include "dwb/error.hpp"

namespace testing {

/// Runs `fn` and checks it throws dwb::Error whose message contains `needle`.
template <class Fn>
void requireError(Fn&& fn, const std::string& needle,
                  dwb::ErrorKind kind = dwb::ErrorKind::Data) {
  try {
    fn();
  } catch (const dwb::Error& e) {
    INFO("message: " << e.what());
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
    CHECK(e.kind() == kind);
    return;
  }
  FAIL("expected an error containing '" << needle << "'");
}

}  // namespace testing
