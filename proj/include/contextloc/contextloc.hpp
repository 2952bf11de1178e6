#pragma once

#include "contextloc/error.hpp"
#include "contextloc/numerics/matrix.hpp"
#include "contextloc/numerics/tape.hpp"
#include "contextloc/numerics/gradcheck.hpp"
#include "contextloc/datamodel.hpp"
#include "contextloc/io.hpp"
#include "contextloc/config.hpp"
#include "contextloc/random.hpp"
#include "contextloc/dataset.hpp"
#include "contextloc/synthetic.hpp"
#include "contextloc/context_nets.hpp"
#include "contextloc/pnet.hpp"
#include "contextloc/heads.hpp"
#include "contextloc/eval.hpp"
#include "contextloc/model.hpp"
#include "contextloc/train.hpp"
#include "contextloc/infer.hpp"
#include "contextloc/pipeline.hpp"
