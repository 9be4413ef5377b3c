// Compiles every public header in one translation unit so a missing include
// or an ODR clash between headers fails the build, not a downstream user.
#include "specsurg/core.hpp"
#include "specsurg/linalg.hpp"
#include "specsurg/ode.hpp"
#include "specsurg/quadrature.hpp"
#include "specsurg/parallel.hpp"
#include "specsurg/potential.hpp"
#include "specsurg/problem.hpp"
#include "specsurg/wave.hpp"
#include "specsurg/spectrum.hpp"
#include "specsurg/surgery.hpp"
#include "specsurg/verify.hpp"
#include "specsurg/fixtures.hpp"
#include "specsurg/io_json.hpp"

namespace specsurg {

// Exposed so the header-check library has a symbol to link.
std::size_t fixture_count() { return fixture_registry().size(); }

}  // namespace specsurg
