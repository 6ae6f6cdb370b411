#ifndef ORDCROWD_HPP
#define ORDCROWD_HPP

#include "ordcrowd/baselines.hpp"
#include "ordcrowd/continuous.hpp"
#include "ordcrowd/dataset.hpp"
#include "ordcrowd/dawid_skene.hpp"
#include "ordcrowd/errors.hpp"
#include "ordcrowd/evaluation.hpp"
#include "ordcrowd/fit.hpp"
#include "ordcrowd/glad.hpp"
#include "ordcrowd/numerics/cg_minimize.hpp"
#include "ordcrowd/numerics/gamma_ml.hpp"
#include "ordcrowd/numerics/special.hpp"
#include "ordcrowd/numerics/truncated_normal.hpp"
#include "ordcrowd/odm.hpp"
#include "ordcrowd/ord_binary.hpp"

#endif // ORDCROWD_HPP
