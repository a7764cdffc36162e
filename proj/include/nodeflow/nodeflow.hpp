#pragma once

#include <nodeflow/core.hpp>
#include <nodeflow/linalg.hpp>
#include <nodeflow/ode.hpp>
#include <nodeflow/fields.hpp>
#include <nodeflow/flow.hpp>
#include <nodeflow/inn.hpp>
#include <nodeflow/parallel.hpp>
#include <nodeflow/approx.hpp>
#include <nodeflow/train.hpp>
#include <nodeflow/compose.hpp>
#include <nodeflow/norm.hpp>
#include <nodeflow/serialize.hpp>
#include <nodeflow/report.hpp>
#include <nodeflow/suites.hpp>
