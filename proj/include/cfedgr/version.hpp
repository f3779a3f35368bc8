#pragma once

#define CFEDGR_VERSION "0.1.0"
