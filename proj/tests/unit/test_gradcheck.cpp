#include "doctest.h"
#include "support/gradcheck.hpp"

using namespace scogait;

TEST_CASE("encoder gradients match central differences") {
  const auto s = testing::check_encoder_gradients();
  MESSAGE("checked " << s.checked << ", max relative error " << s.max_rel << " (analytic "
                     << s.worst_analytic << ", numeric " << s.worst_numeric << ")");
  CHECK(s.checked > 500);
  CHECK(s.within == s.checked);
}
