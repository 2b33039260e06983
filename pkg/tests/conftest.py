import pytest

from courselens.embedding import EmbedderConfig, MockEmbedder
from courselens.gateway import LlmGateway
from courselens.service import CourseService, ServiceSettings
from courselens.store import EventStore

# the three exercise statements used throughout keyword tests
EXERCISE_SEARCH = (
    "According to the documentation, which kind of functions do the C++ standard "
    "library and java provide to search a value in an array? What is available in "
    "the boost C++ libraries? Use these libraries (unless instructed otherwise) to "
    "make your work easier!"
)
EXERCISE_MEDIAN = (
    "This simple function calculates the median from an ordered array. Describe "
    "its time complexity in terms of the big o notation. What is the main "
    "difference here, compared to similar exercises on arrays when considering n?"
)
EXERCISE_TREE = (
    "A binary tree is a tree in which each node has zero, one, or two children "
    "(see figure). How many steps would a search for a number take in such a "
    "tree? Answer in terms of n. Note that trees will be covered in later chapters."
)

EXERCISE_TEXTS = [EXERCISE_SEARCH, EXERCISE_MEDIAN, EXERCISE_TREE]


@pytest.fixture
def mock_embedder():
    return MockEmbedder(EmbedderConfig(backend="mock", dimension=384, mock_seed=7))


@pytest.fixture
def small_embedder():
    # tiny dimension keeps hypothesis-heavy tests fast
    return MockEmbedder(EmbedderConfig(backend="mock", dimension=32, mock_seed=7))


@pytest.fixture
def store(tmp_path):
    s = EventStore(tmp_path / "events.jsonl")
    yield s
    s.close()


@pytest.fixture
def service(store, mock_embedder):
    return CourseService(store=store, embedder=mock_embedder, gateway=None)


@pytest.fixture
def course(service):
    return service.create_course("Algorithms and data structures")
