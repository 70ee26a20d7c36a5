# lsfkit - Learned static functions
# Copyright (C) 2026 lsfkit contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.
from lsfkit.custom_types import BuildRequest

BUILD_API_REQUEST = {
    'api_version': BuildRequest.API_VERSION,
    'name': 'gauss',
    'data': 'gauss.csv',
    'model': 'gnb',
    'seed': 42,
}


def build_request(**overrides) -> dict:
    """
    Build request payload with some fields replaced

    :param overrides: Fields to replace
    :return: Request payload
    """
    return {**BUILD_API_REQUEST, **overrides}
