#pragma once

#include "asmu/asm.hpp"
#include "asmu/assignment.hpp"
#include "asmu/config.hpp"
#include "asmu/error.hpp"
#include "asmu/geometry.hpp"
#include "asmu/io.hpp"
#include "asmu/matching.hpp"
#include "asmu/random.hpp"
#include "asmu/ranking.hpp"
#include "asmu/selection.hpp"
#include "asmu/simulator.hpp"
#include "asmu/stats.hpp"
#include "asmu/transport.hpp"
