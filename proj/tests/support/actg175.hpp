#pragma once

#include "survtransport/cli.hpp"

namespace survtransport::testing {

// Converts an ACTG 175 export with the speff2trial column names (days, cens,
// arms, gender, age, cd40, race, drugs, wtkg) to the CLI trial layout used by
// make_actg_like(): months, arm labels, white = 1 - race, cd4cat from cd40
// with cut points 200 and 500.
cli::CsvTable convert_actg175(const cli::CsvTable& raw);

}  // namespace survtransport::testing
