#pragma once

// Numerical core: FRF data, vector fitting, Loewner realization,
// stabilization, the two-mode aeroelastic model and the p-k solver.
// The CLI layer (config.hpp, pipeline.hpp) is included separately because
// it pulls in Boost and OpenSSL.

#include "flutterid/aero_rom.hpp"
#include "flutterid/error.hpp"
#include "flutterid/fixtures.hpp"
#include "flutterid/frf.hpp"
#include "flutterid/frf_io.hpp"
#include "flutterid/linalg.hpp"
#include "flutterid/loewner.hpp"
#include "flutterid/pk_flutter.hpp"
#include "flutterid/stabilization.hpp"
#include "flutterid/theodorsen.hpp"
#include "flutterid/vector_fitting.hpp"
