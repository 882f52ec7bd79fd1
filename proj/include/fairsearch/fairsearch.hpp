#pragma once

// Everything except the HTTP service (fairsearch/serve.hpp).

#include "fairsearch/csv.hpp"
#include "fairsearch/data.hpp"
#include "fairsearch/encoding.hpp"
#include "fairsearch/error.hpp"
#include "fairsearch/learners.hpp"
#include "fairsearch/metrics.hpp"
#include "fairsearch/mitigation.hpp"
#include "fairsearch/pareto.hpp"
#include "fairsearch/random.hpp"
#include "fairsearch/reporting.hpp"
#include "fairsearch/results.hpp"
#include "fairsearch/search.hpp"
