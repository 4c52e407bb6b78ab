#pragma once

#include "tradeoff/artifact.hpp"
#include "tradeoff/classifier.hpp"
#include "tradeoff/dataset.hpp"
#include "tradeoff/errors.hpp"
#include "tradeoff/family.hpp"
#include "tradeoff/frontier.hpp"
#include "tradeoff/metrics.hpp"
