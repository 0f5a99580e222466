from datetime import datetime, timedelta, timezone

import pytest

from astroturf.simulator import purge_fixture, simulate, standard_fixture
from astroturf.stream import DeletionNotice, TweetRecord

UTC = timezone.utc
EPOCH = datetime(2022, 5, 19, 19, 0, tzinfo=UTC)


def at(*args) -> datetime:
    return datetime(*args, tzinfo=UTC)


def tweet(tid, t, text="kedi köpek #X", author=None, handle="kullanici", created=None, retweet=False):
    if not isinstance(t, datetime):
        t = EPOCH + timedelta(seconds=t)
    return TweetRecord(tid, author if author is not None else 100 + tid, handle, t,
                       created or at(2020, 3, 1), text, retweet)


def delete(tid, t, author=None):
    if not isinstance(t, datetime):
        t = EPOCH + timedelta(seconds=t)
    return DeletionNotice(tid, author if author is not None else 100 + tid, t)


@pytest.fixture(scope="session")
def standard_sim():
    return simulate(standard_fixture(0))


@pytest.fixture(scope="session")
def purge_sim():
    return simulate(purge_fixture(0))
