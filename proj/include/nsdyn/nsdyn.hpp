#ifndef NSDYN_NSDYN_HPP
#define NSDYN_NSDYN_HPP

#include "error.hpp"
#include "parallel.hpp"
#include "sphere.hpp"
#include "polynomial.hpp"
#include "ratmap.hpp"
#include "cycle_newton.hpp"
#include "transport.hpp"
#include "measures.hpp"
#include "family.hpp"
#include "orbitstat.hpp"
#include "periodic.hpp"
#include "postcritical.hpp"
#include "bifurcation.hpp"
#include "json_io.hpp"
#include "cli.hpp"

#endif
