#pragma once

#include "hypoheat/config.hpp"
#include "hypoheat/error.hpp"
#include "hypoheat/group.hpp"
#include "hypoheat/harness.hpp"
#include "hypoheat/mollify.hpp"
#include "hypoheat/norms.hpp"
#include "hypoheat/operators.hpp"
#include "hypoheat/report_io.hpp"
#include "hypoheat/solve.hpp"
