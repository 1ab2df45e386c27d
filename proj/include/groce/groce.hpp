#ifndef GROCE_GROCE_HPP
#define GROCE_GROCE_HPP

#include "groce/clusterid.hpp"
#include "groce/config.hpp"
#include "groce/embedstore.hpp"
#include "groce/eraser.hpp"
#include "groce/errors.hpp"
#include "groce/heatkernel.hpp"
#include "groce/report.hpp"
#include "groce/semgraph.hpp"
#include "groce/synthlab.hpp"

#endif  // GROCE_GROCE_HPP
